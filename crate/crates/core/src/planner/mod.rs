//! Receding-horizon trajectory optimization over flat-output endpoints.
//!
//! Decision variables are the `p` endpoints `zbar_i = [x, y, psi]` of a
//! piecewise-quadratic flat trajectory. The objective is
//! `J = -F_hat(zbar) + w_p * I_hat(zbar)` where `F_hat` is the sigma-point
//! estimate of the expected alignment between sampled and desired bearings
//! and `I_hat` the smoothed input-limit violation.

mod bearing;
mod penalty;
mod spline;
mod unscented;

pub use bearing::{desired_bearing, optimal_bearing_set};
pub use penalty::{constraint_violation, max_abs_wrench, penalty_g};
pub use spline::{constraint_system, solve_coefficients, FlatTrajectory, Piece};
pub use unscented::{alignment_term, sigma_points, similarity_cost, SigmaSet};

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GbtError, Result};
use crate::optim::{minimize, BfgsOptions};
use crate::vehicle::{AuvParams, AuvState};

/// Cap on the first line-search step (m or rad). Penalty gradients are
/// orders of magnitude steeper than the alignment term.
const MAX_TRIAL_STEP: f64 = 0.1;
/// Extra solver rounds allowed when the plan still violates the limits.
const INFEASIBLE_RESTARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Planning horizon `p` (pieces).
    pub pieces: usize,
    /// Prediction horizon `n` (steps).
    pub horizon: usize,
    /// Angular rate of the desired bearing (rad/s).
    pub omega: f64,
    pub kappa: f64,
    /// Trapezoid resolution `n_c` per piece.
    pub quadrature_nodes: usize,
    /// Limit scale `gamma` in `(0, 1]`.
    pub gamma: f64,
    pub penalty_weight: f64,
    /// Smoothing width of the hinge (N, or N m for yaw).
    pub varpi: f64,
    /// Piece duration `T` (s). Overwritten from the sensor period by the harness.
    pub segment: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Standoff clamp used by the initial guess (m).
    pub standoff_min: f64,
    pub standoff_max: f64,
    /// Weight of the optional range-keeping term; zero disables it.
    pub range_weight: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            pieces: 5,
            horizon: 11,
            omega: TAU,
            kappa: 1.0,
            quadrature_nodes: 20,
            gamma: 0.98,
            penalty_weight: 1000.0,
            varpi: 1.0,
            segment: 0.1,
            max_iters: 100,
            tol: 1e-6,
            standoff_min: 0.5,
            standoff_max: 5.0,
            range_weight: 1.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(GbtError::InvalidConfig {
                field: format!("planner.{field}"),
                reason: reason.into(),
            })
        };
        if self.pieces < 2 || self.pieces > self.horizon {
            return bad("pieces", "must satisfy 2 <= pieces <= horizon");
        }
        if self.quadrature_nodes < 2 {
            return bad("quadrature_nodes", "must be at least 2");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must lie in (0, 1]");
        }
        if !(self.kappa > -2.0) {
            return bad("kappa", "must exceed -2");
        }
        if !(self.penalty_weight > 0.0) {
            return bad("penalty_weight", "must be positive");
        }
        if !(self.varpi > 0.0) {
            return bad("varpi", "must be positive");
        }
        if !(self.segment > 0.0) {
            return bad("segment", "must be positive");
        }
        if !self.omega.is_finite() {
            return bad("omega", "must be finite");
        }
        if !(self.tol > 0.0) {
            return bad("tol", "must be positive");
        }
        if !(self.standoff_min > 0.0 && self.standoff_max >= self.standoff_min) {
            return bad("standoff_min", "need 0 < standoff_min <= standoff_max");
        }
        if !(self.range_weight >= 0.0) {
            return bad("range_weight", "must be nonnegative");
        }
        Ok(())
    }
}

/// Predicted target distribution at one future sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonPosterior {
    pub t: f64,
    pub mean: Vector2<f64>,
    /// Posterior covariance plus sensor noise, `Sigma + sigma_eps^2 I`.
    pub cov_tilde: Matrix2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanDiagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub initial_cost: f64,
    pub cost: f64,
    pub similarity: f64,
    pub penalty: f64,
    /// Max absolute wrench per channel over all quadrature nodes of the plan.
    pub max_wrench: Vector3<f64>,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub endpoints: Vec<Vector3<f64>>,
    pub trajectory: FlatTrajectory,
    pub diagnostics: PlanDiagnostics,
}

/// Standoff used by the initial guess: current estimated range, clamped.
pub fn standoff(estimate_now: &Vector2<f64>, p_auv: &Vector2<f64>, cfg: &PlannerConfig) -> f64 {
    (estimate_now - p_auv)
        .norm()
        .clamp(cfg.standoff_min, cfg.standoff_max)
}

/// Places each endpoint at `mu_i - r0 * desired_i`, heading toward `mu_i`,
/// with headings unwrapped continuously from the current yaw.
pub fn initial_guess(
    state: &AuvState,
    horizon: &[HorizonPosterior],
    schedule: &[Vector2<f64>],
    r0: f64,
) -> Vec<Vector3<f64>> {
    let mut psi_prev = state.eta[2];
    horizon
        .iter()
        .zip(schedule)
        .map(|(h, d)| {
            let pos = h.mean - d * r0;
            let look = h.mean - pos;
            let target_heading = look[1].atan2(look[0]);
            let psi = psi_prev + wrap_angle(target_heading - psi_prev);
            psi_prev = psi;
            Vector3::new(pos[0], pos[1], psi)
        })
        .collect()
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

struct Objective<'a> {
    state: &'a AuvState,
    schedule: &'a [Vector2<f64>],
    sigma_sets: Vec<SigmaSet>,
    means: Vec<Vector2<f64>>,
    r0: f64,
    params: &'a AuvParams,
    cfg: &'a PlannerConfig,
    t_start: f64,
}

struct Evaluation {
    cost: f64,
    similarity: f64,
    penalty: f64,
    trajectory: FlatTrajectory,
}

impl Objective<'_> {
    fn endpoints(x: &[f64]) -> Vec<Vector3<f64>> {
        x.chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let ends = Self::endpoints(x);
        let trajectory = solve_coefficients(
            &self.state.eta,
            &self.state.nu,
            &ends,
            self.cfg.segment,
            self.t_start,
        )?;
        let positions: Vec<Vector2<f64>> = ends.iter().map(|e| Vector2::new(e[0], e[1])).collect();
        let similarity = similarity_cost(&positions, self.schedule, &self.sigma_sets)?;
        let penalty = constraint_violation(&trajectory, self.params, self.cfg);
        let mut cost = -similarity + self.cfg.penalty_weight * penalty;
        if self.cfg.range_weight > 0.0 {
            cost += self.cfg.range_weight
                * positions
                    .iter()
                    .zip(&self.means)
                    .map(|(p, m)| ((m - p).norm() - self.r0).powi(2))
                    .sum::<f64>();
        }
        Ok(Evaluation {
            cost,
            similarity,
            penalty,
            trajectory,
        })
    }

    fn cost(&self, x: &[f64]) -> f64 {
        self.evaluate(x).map(|e| e.cost).unwrap_or(f64::INFINITY)
    }
}

fn flatten(ends: &[Vector3<f64>]) -> Vec<f64> {
    ends.iter().flat_map(|e| e.iter().copied()).collect()
}

/// Endpoints of the zero-acceleration (coasting) flat trajectory from `state`.
pub fn coasting_guess(state: &AuvState, pieces: usize, segment: f64) -> Vec<Vector3<f64>> {
    let vel = crate::vehicle::rotation_matrix(state.eta[2]) * state.nu;
    (1..=pieces)
        .map(|i| state.eta + vel * (i as f64 * segment))
        .collect()
}

/// Previous plan advanced by one piece; the freed last endpoint is extrapolated
/// at the final velocity of the old plan.
pub fn shifted_guess(previous: &FlatTrajectory) -> Vec<Vector3<f64>> {
    let mut ends = previous.endpoints();
    let last = previous
        .pieces
        .last()
        .expect("plans have at least one piece");
    let tail = last.position(previous.segment) + last.velocity(previous.segment) * previous.segment;
    ends.remove(0);
    ends.push(tail);
    ends
}

/// Minimizes `-F_hat + w_p I_hat` over the endpoints.
///
/// `estimate_now` is the posterior mean at the current time (sets the standoff);
/// `horizon` and `schedule` cover `t_{k+1} .. t_{k+p}`. The search starts from
/// whichever candidate has the lowest objective: the standoff guess, the
/// coasting trajectory, or `previous` advanced by one piece when given.
#[allow(clippy::too_many_arguments)]
pub fn optimize_endpoints(
    state: &AuvState,
    t_now: f64,
    estimate_now: &Vector2<f64>,
    horizon: &[HorizonPosterior],
    schedule: &[Vector2<f64>],
    params: &AuvParams,
    cfg: &PlannerConfig,
    previous: Option<&FlatTrajectory>,
) -> Result<Plan> {
    assert_eq!(horizon.len(), cfg.pieces, "one posterior per planned piece");
    assert_eq!(
        schedule.len(),
        cfg.pieces,
        "one desired bearing per planned piece"
    );
    let sigma_sets = horizon
        .iter()
        .map(|h| sigma_points(&h.mean, &h.cov_tilde, cfg.kappa))
        .collect::<Result<Vec<_>>>()?;
    let r0 = standoff(estimate_now, &state.position(), cfg);
    let objective = Objective {
        state,
        schedule,
        sigma_sets,
        means: horizon.iter().map(|h| h.mean).collect(),
        r0,
        params,
        cfg,
        t_start: t_now,
    };
    let guess = flatten(&initial_guess(state, horizon, schedule, r0));
    let guess_cost = objective.cost(&guess);
    let mut candidates = vec![flatten(&coasting_guess(state, cfg.pieces, cfg.segment))];
    if let Some(prev) = previous.filter(|p| p.pieces.len() == cfg.pieces) {
        candidates.push(flatten(&shifted_guess(prev)));
    }
    let (x0, _) = candidates
        .into_iter()
        .map(|c| {
            let v = objective.cost(&c);
            (c, v)
        })
        .fold(
            (guess, guess_cost),
            |best, c| if c.1 < best.1 { c } else { best },
        );
    let mut opts = BfgsOptions::new(x0.len(), cfg.max_iters, cfg.tol, 1e-6)
        .with_max_step(MAX_TRIAL_STEP)
        .with_initial_scaling();
    for i in 0..cfg.pieces {
        opts.fd_steps[3 * i + 2] = 1e-5;
    }
    let f = |x: &[f64]| objective.cost(x);
    let mut outcome = minimize(&f, &x0, &opts);
    let mut iterations = outcome.iterations;
    let mut evaluations = outcome.evaluations;
    // An iterate still violating the limits gets fresh restarts.
    for _ in 0..INFEASIBLE_RESTARTS {
        let feasible = objective
            .evaluate(&outcome.x)
            .map_or(true, |e| e.penalty == 0.0);
        if feasible || outcome.converged || !outcome.value.is_finite() {
            break;
        }
        let next = minimize(&f, &outcome.x, &opts);
        iterations += next.iterations;
        evaluations += next.evaluations;
        if next.value <= outcome.value {
            outcome = next;
        } else {
            break;
        }
    }
    let degraded = !outcome.value.is_finite();
    let x = if degraded { x0 } else { outcome.x };
    let eval = objective.evaluate(&x)?;
    let max_wrench = max_abs_wrench(
        &eval.trajectory,
        0..cfg.pieces,
        cfg.quadrature_nodes,
        params,
    );
    Ok(Plan {
        endpoints: Objective::endpoints(&x),
        trajectory: eval.trajectory,
        diagnostics: PlanDiagnostics {
            iterations,
            evaluations,
            initial_cost: guess_cost,
            cost: eval.cost,
            similarity: eval.similarity,
            penalty: eval.penalty,
            max_wrench,
            degraded,
        },
    })
}
