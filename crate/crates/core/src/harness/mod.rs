//! Closed-loop episodes: sample, track, plan, follow.

mod coverage;
mod metrics;
mod sweep;
mod target;

pub use coverage::{coverage_episode, coverage_run, CoverageConfig, CoverageReport};
pub use metrics::{metrics, pearson, BaselineSummary, RunSummary, WindowStats};
pub use sweep::{
    ability_variants, mode_variants, parallel_map, run_cells, sweep, sweep_cells, sweep_runs,
    thread_count, variant_stats, variants, SweepCell, SweepKind, SweepRun, VariantStats,
    ABILITY_SCALES,
};
pub use target::{integrate_case3, sample_gp_path, Tabulated, TargetModel};

use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{
    motion_policy, plkf_step, poly_fit, ray_guess, MotionMode, PlkfState, PolicyAction, PolyFit,
};
use crate::config::{BaselineConfig, BaselineKind, ScenarioConfig};
use crate::error::{GbtError, Result};
use crate::gp::{build_posterior, error_bound, tune_hyperparameters, GpPosterior, KernelParams};
use crate::planner::{
    desired_bearing, optimize_endpoints, standoff, FlatTrajectory, HorizonPosterior,
};
use crate::records::StepRecord;
use crate::sensing::{measure_bearing, BearingSample, SlidingDataset};
use crate::vehicle::{integrate, AuvState, Wrench};

/// Independent random streams derived from the episode seed.
const STREAM_TARGET: u64 = 0;
const STREAM_SENSOR: u64 = 1;
const STREAM_POLICY: u64 = 2;

pub fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Predicted and true target track over one horizon, kept for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub times: Vec<f64>,
    pub predicted: Vec<Vector2<f64>>,
    pub truth: Vec<Vector2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTrace {
    pub kind: BaselineKind,
    /// Same rows as the main log with `avg_err` taken from this estimator.
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub records: Vec<StepRecord>,
    pub baselines: Vec<BaselineTrace>,
    pub snapshots: Vec<Snapshot>,
    /// Whether the bound held at every query time of step `k`.
    pub bound_events: Vec<bool>,
    /// Distance between the planned position at `t_{k+1}` and the simulated one.
    pub open_loop_gaps: Vec<f64>,
    pub max_window: usize,
    pub summary: RunSummary,
    pub failure: Option<GbtError>,
}

/// Pseudo-linear Kalman filter or polynomial regression run on the episode's bearings.
struct BaselineTracker {
    kind: BaselineKind,
    cfg: BaselineConfig,
    sigma_eps: f64,
    first: Option<BearingSample>,
    latest: Option<BearingSample>,
    plkf: Option<PlkfState>,
    fit: Option<PolyFit>,
    window: SlidingDataset,
}

impl BaselineTracker {
    fn new(kind: BaselineKind, cfg: BaselineConfig, sigma_eps: f64) -> Self {
        Self {
            kind,
            cfg,
            sigma_eps,
            first: None,
            latest: None,
            plkf: None,
            fit: None,
            window: SlidingDataset::new(cfg.pr_window),
        }
    }

    fn update(&mut self, sample: &BearingSample) {
        match self.kind {
            BaselineKind::Plkf => match (&self.plkf, &self.first) {
                (Some(s), _) => {
                    let dt = sample.t - self.latest.expect("filter has seen a sample").t;
                    match plkf_step(s, sample, dt, self.cfg.plkf_q_accel, self.sigma_eps) {
                        Ok(next) => self.plkf = Some(next),
                        Err(e) => log::warn!("plkf update skipped at t={}: {e}", sample.t),
                    }
                }
                (None, Some(first)) => self.plkf = Some(PlkfState::triangulate(first, sample)),
                (None, None) => self.first = Some(*sample),
            },
            BaselineKind::Pr => {
                self.window.push(*sample);
                let n = self.window.len();
                if n >= 2 {
                    let order = self.cfg.pr_order.min(n / 2 - 1);
                    match poly_fit(&self.window, order) {
                        Ok(fit) => self.fit = Some(fit),
                        Err(e) => log::debug!("poly fit kept previous at t={}: {e}", sample.t),
                    }
                }
            }
        }
        self.latest = Some(*sample);
    }

    fn predict(&self, t: f64) -> Vector2<f64> {
        let latest = self.latest.expect("predict after update");
        match self.kind {
            BaselineKind::Plkf => self.plkf.map(|s| s.predict_position(t - latest.t)),
            BaselineKind::Pr => self.fit.as_ref().map(|f| f.predict(t)),
        }
        .unwrap_or_else(|| ray_guess(&latest))
    }
}

fn average_error(predicted: impl Iterator<Item = Vector2<f64>>, truth: &[Vector2<f64>]) -> f64 {
    let total: f64 = predicted.zip(truth).map(|(p, q)| (p - q).norm()).sum();
    total / truth.len() as f64
}

struct Motion {
    next: AuvState,
    tau_abs: Vector3<f64>,
    cost: f64,
    penalty: f64,
    iters: usize,
    gap: f64,
    plan: Option<FlatTrajectory>,
}

/// Runs one episode. Errors abort the loop; the log up to the failing step
/// is kept and the error is returned in [`Episode::failure`].
pub fn run_episode(cfg: &ScenarioConfig) -> Result<Episode> {
    cfg.validate()?;
    let period = cfg.sensor.period;
    let steps = cfg.steps();
    let n = cfg.planner.horizon;
    let t_end = (steps + n) as f64 * period;
    let target = TargetModel::from_config(
        &cfg.target,
        t_end,
        period,
        &mut seeded_stream(cfg.seed, STREAM_TARGET),
    )?;
    let mut sensor_rng = seeded_stream(cfg.seed, STREAM_SENSOR);
    let mut policy_rng = seeded_stream(cfg.seed, STREAM_POLICY);
    let sigma_eps = cfg.sensor.sigma_eps;

    let mut state = AuvState::new(cfg.initial_state.eta.into(), cfg.initial_state.nu.into());
    let mut data = SlidingDataset::new(cfg.sensor.capacity);
    let mut kp = KernelParams::new(cfg.tracker.length_scale, cfg.tracker.signal_var, sigma_eps);
    let mut previous_plan: Option<FlatTrajectory> = None;
    let mut trackers: Vec<BaselineTracker> = cfg
        .baselines
        .iter()
        .map(|&b| BaselineTracker::new(b, cfg.baseline, sigma_eps))
        .collect();

    let mut ep = Episode {
        records: Vec::with_capacity(steps),
        baselines: cfg
            .baselines
            .iter()
            .map(|&kind| BaselineTrace {
                kind,
                records: Vec::with_capacity(steps),
            })
            .collect(),
        snapshots: Vec::new(),
        bound_events: Vec::with_capacity(steps),
        open_loop_gaps: Vec::with_capacity(steps),
        max_window: 0,
        summary: RunSummary::default(),
        failure: None,
    };
    let mut snapshot_steps: Vec<usize> = cfg
        .output
        .snapshot_times
        .iter()
        .map(|&ts| ((ts / period).round() as usize).min(steps.saturating_sub(1)))
        .collect();
    snapshot_steps.dedup();

    for k in 0..steps {
        let clock = Instant::now();
        let t = k as f64 * period;
        let outcome = (|| -> Result<()> {
            let p_target = target.position(t);
            let bearing =
                measure_bearing(&p_target, &state.position(), sigma_eps, &mut sensor_rng)?;
            let sample = BearingSample {
                t,
                bearing,
                p_auv: state.position(),
            };
            data.push(sample);
            ep.max_window = ep.max_window.max(data.len());
            if !cfg.tracker.fixed_kernel && k % cfg.tracker.tune_every_k == 0 {
                kp = tune_hyperparameters(&data, &kp);
            }
            let gp = build_posterior(&data, &kp)?;
            let times: Vec<f64> = (0..=n).map(|i| t + i as f64 * period).collect();
            let truth: Vec<Vector2<f64>> = times.iter().map(|&ti| target.position(ti)).collect();
            let preds: Vec<_> = times.iter().map(|&ti| gp.predict(ti)).collect();
            let avg_err = average_error(preds.iter().map(|(m, _)| *m), &truth);
            let bounds = error_bound(&gp, &times, cfg.tracker.delta, &data);
            let event = bounds
                .iter()
                .zip(preds.iter().zip(&truth))
                .all(|(b, ((m, _), q))| (m - q).norm() <= b.radius());

            let motion = step_motion(
                cfg,
                k,
                t,
                &state,
                &gp,
                &preds,
                previous_plan.as_ref(),
                &mut policy_rng,
            )?;

            for (tracker, trace) in trackers.iter_mut().zip(ep.baselines.iter_mut()) {
                tracker.update(&sample);
                let err = average_error(times.iter().map(|&ti| tracker.predict(ti)), &truth);
                trace.records.push(StepRecord {
                    avg_err: err,
                    ..Default::default()
                });
            }
            if snapshot_steps.contains(&k) {
                ep.snapshots.push(Snapshot {
                    t,
                    times: times.clone(),
                    predicted: preds.iter().map(|(m, _)| *m).collect(),
                    truth: truth.clone(),
                });
            }
            let ms = if cfg.output.log_wall_time {
                clock.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let record = StepRecord {
                k,
                t,
                target_x: p_target[0],
                target_y: p_target[1],
                auv_x: state.eta[0],
                auv_y: state.eta[1],
                auv_psi: state.eta[2],
                u: state.nu[0],
                v: state.nu[1],
                r: state.nu[2],
                tau_u_max_abs: motion.tau_abs[0],
                tau_v_max_abs: motion.tau_abs[1],
                tau_r_max_abs: motion.tau_abs[2],
                bearing_x: bearing[0],
                bearing_y: bearing[1],
                avg_err,
                bound: bounds[0].radius(),
                ccbm: bounds[0].ccbm_value,
                cost: motion.cost,
                penalty: motion.penalty,
                iters: motion.iters,
                ms,
            };
            for trace in ep.baselines.iter_mut() {
                let last = trace.records.last_mut().expect("pushed above");
                *last = StepRecord {
                    avg_err: last.avg_err,
                    ..record
                };
            }
            ep.records.push(record);
            ep.bound_events.push(event);
            ep.open_loop_gaps.push(motion.gap);
            state = motion.next;
            previous_plan = motion.plan;
            Ok(())
        })();
        if let Err(e) = outcome {
            log::warn!("episode aborted at step {k} (t={t:.3}): {e}");
            // Keep every log aligned to the completed steps.
            for trace in ep.baselines.iter_mut() {
                trace.records.truncate(ep.records.len());
            }
            ep.failure = Some(e);
            break;
        }
    }
    ep.summary = metrics(cfg, &ep);
    Ok(ep)
}

#[allow(clippy::too_many_arguments)]
fn step_motion(
    cfg: &ScenarioConfig,
    k: usize,
    t: f64,
    state: &AuvState,
    gp: &GpPosterior,
    preds: &[(Vector2<f64>, nalgebra::Matrix2<f64>)],
    previous: Option<&FlatTrajectory>,
    rng: &mut ChaCha8Rng,
) -> Result<Motion> {
    let period = cfg.sensor.period;
    let params = cfg.vehicle.with_limit_scale(cfg.ability_scale);
    let omega = cfg.planner.omega;
    let hold = |w: Wrench| -> Result<Motion> {
        let next = integrate(state, |_| w, t, t + period, cfg.rk4_step, &params)?;
        Ok(Motion {
            next,
            tau_abs: w.0.abs(),
            cost: 0.0,
            penalty: 0.0,
            iters: 0,
            gap: 0.0,
            plan: None,
        })
    };
    match cfg.mode {
        MotionMode::Gbt => {
            let p = cfg.planner.pieces;
            let noise = nalgebra::Matrix2::identity() * gp.params().noise_var;
            let horizon: Vec<HorizonPosterior> = (1..=p)
                .map(|i| HorizonPosterior {
                    t: t + i as f64 * period,
                    mean: preds[i].0,
                    cov_tilde: preds[i].1 + noise,
                })
                .collect();
            let schedule: Vec<Vector2<f64>> = horizon
                .iter()
                .map(|h| desired_bearing(h.t, omega))
                .collect();
            let plan = optimize_endpoints(
                state,
                t,
                &preds[0].0,
                &horizon,
                &schedule,
                &params,
                &cfg.planner,
                previous,
            )?;
            if plan.diagnostics.degraded {
                log::warn!("step {k}: planner returned the initial guess");
            }
            let traj = plan.trajectory;
            let mut tau_abs = Vector3::zeros();
            let next = integrate(
                state,
                |tt| {
                    let w = traj.piece_wrench(0, tt - t, &params);
                    tau_abs = tau_abs.zip_map(&w.0, |a: f64, b: f64| a.max(b.abs()));
                    w
                },
                t,
                t + period,
                cfg.rk4_step,
                &params,
            )?;
            let planned = traj.pieces[0].position(period);
            let gap = (next.eta.xy() - planned.xy()).norm();
            Ok(Motion {
                next,
                tau_abs,
                cost: plan.diagnostics.similarity,
                penalty: plan.diagnostics.penalty,
                iters: plan.diagnostics.iterations,
                gap,
                plan: Some(traj),
            })
        }
        mode => {
            let placement = (mode == MotionMode::DirectPlacement).then(|| {
                let r0 = standoff(&preds[0].0, &state.position(), &cfg.planner);
                (preds[1].0, desired_bearing(t + period, omega), r0)
            });
            match motion_policy(mode, state, &params, rng, placement) {
                PolicyAction::Hold(w) => hold(w),
                PolicyAction::Place(pose) => Ok(Motion {
                    next: pose,
                    tau_abs: Vector3::zeros(),
                    cost: 0.0,
                    penalty: 0.0,
                    iters: 0,
                    gap: 0.0,
                    plan: None,
                }),
            }
        }
    }
}
