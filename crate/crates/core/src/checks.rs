//! Invariant suites run by `gbt check` and the acceptance tests.
//!
//! Each check draws its own fuzz corpus from a fixed seed and compares the
//! library against an independent computation.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix2, Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::gp::{build_posterior, error_bound, kernel_eval, GpPosterior, KernelParams};
use crate::harness::{coverage_run, seeded_stream, CoverageConfig};
use crate::linalg::sym2_norm;
use crate::planner::{alignment_term, optimal_bearing_set, sigma_points, solve_coefficients};
use crate::sensing::{
    assemble_pseudo_linear, cumulative_bearing_matrix, orth_complement, BearingSample,
    SlidingDataset,
};
use crate::vehicle::{integrate, AuvParams, AuvState, DEFAULT_RK4_STEP};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

fn finish(name: &str, clock: Instant, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
        seconds: clock.elapsed().as_secs_f64(),
    }
}

/// Condition number from nalgebra's general symmetric eigensolver.
fn condition_oracle(p: &Matrix2<f64>) -> f64 {
    let e = p.symmetric_eigen().eigenvalues;
    let (lo, hi) = (e.min().abs(), e.max().abs());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn random_unit<R: Rng>(rng: &mut R) -> Vector2<f64> {
    let th: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    Vector2::new(th.cos(), th.sin())
}

/// Uniform bearing sets have condition number 1 and random search over
/// `samples` sets per size finds nothing smaller.
pub fn optimal_bearing_sets(samples: usize, seed: u64) -> CheckResult {
    let clock = Instant::now();
    let mut rng = seeded_stream(seed, 11);
    let mut worst_uniform: f64 = 0.0;
    let mut best_random = f64::INFINITY;
    for m in 3..=20 {
        let set = optimal_bearing_set(m).expect("m >= 3");
        worst_uniform =
            worst_uniform.max((condition_oracle(&cumulative_bearing_matrix(&set)) - 1.0).abs());
        for _ in 0..samples {
            let bearings: Vec<Vector2<f64>> = (0..m).map(|_| random_unit(&mut rng)).collect();
            best_random = best_random.min(condition_oracle(&cumulative_bearing_matrix(&bearings)));
        }
    }
    let passed = worst_uniform <= 1e-9 && best_random >= 1.0 - 1e-12;
    finish(
        "optimal bearing set",
        clock,
        passed,
        format!("max |cond - 1| = {worst_uniform:.2e}, best random cond = {best_random:.6}"),
    )
}

/// The orthogonal complement is perpendicular with norm sqrt(2), and the
/// pseudo-linear equations hold exactly for noise-free bearings.
pub fn orthogonality_fuzz(cases: usize, seed: u64) -> CheckResult {
    let clock = Instant::now();
    let mut rng = seeded_stream(seed, 12);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let l = random_unit(&mut rng);
        let lb = orth_complement(&l);
        worst = worst.max(lb.dot(&l).abs());
        worst = worst.max((lb.norm() - std::f64::consts::SQRT_2).abs());
        let target = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let n = rng.gen_range(1..=20);
        let samples: Vec<BearingSample> = (0..n)
            .map(|i| {
                let p_auv = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let bearing = (target - p_auv).normalize();
                BearingSample {
                    t: i as f64 * 0.1,
                    bearing,
                    p_auv,
                }
            })
            .collect();
        let batch = assemble_pseudo_linear(&SlidingDataset::from_samples(n, samples))
            .expect("nonempty batch");
        for (row, y) in batch.rows.iter().zip(batch.y.iter()) {
            worst = worst.max((row.dot(&target) - y).abs() / (1.0 + y.abs()));
        }
    }
    finish(
        "orthogonality fuzz",
        clock,
        worst <= 1e-12,
        format!("{cases} cases, max residual {worst:.2e}"),
    )
}

fn random_psd<R: Rng>(rng: &mut R, max_sd: f64) -> Matrix2<f64> {
    let a: f64 = rng.gen_range(0.0..max_sd);
    let b: f64 = rng.gen_range(0.0..max_sd);
    let th: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let r = nalgebra::Rotation2::new(th).into_inner();
    r * Matrix2::new(a * a, 0.0, 0.0, b * b) * r.transpose()
}

/// Sigma-point weights sum to one and reproduce mean and covariance.
pub fn ut_moments(cases: usize, seed: u64) -> CheckResult {
    let clock = Instant::now();
    let mut rng = seeded_stream(seed, 13);
    let (mut wsum, mut mean_err, mut cov_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..cases {
        let mu = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let cov = random_psd(&mut rng, 2.0);
        let kappa = rng.gen_range(0.1..3.0);
        let s = sigma_points(&mu, &cov, kappa).expect("PSD input");
        wsum = wsum.max((s.weights.iter().sum::<f64>() - 1.0).abs());
        let m: Vector2<f64> = s.points.iter().zip(s.weights).map(|(p, w)| p * w).sum();
        let c: Matrix2<f64> = s
            .points
            .iter()
            .zip(s.weights)
            .map(|(p, w)| (p - mu) * (p - mu).transpose() * w)
            .sum();
        mean_err = mean_err.max((m - mu).norm());
        cov_err = cov_err.max((c - cov).norm());
    }
    finish(
        "UT moments",
        clock,
        wsum <= 1e-12 && mean_err <= 1e-10 && cov_err <= 1e-8,
        format!("weights {wsum:.1e}, mean {mean_err:.1e}, cov {cov_err:.1e}"),
    )
}

/// Random window with `n` samples, times increasing by 0.05..0.6 s.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize) -> SlidingDataset {
    let mut t = 0.0;
    let samples: Vec<_> = (0..n)
        .map(|_| {
            t += rng.gen_range(0.05..0.6);
            BearingSample {
                t,
                bearing: random_unit(rng),
                p_auv: Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
            }
        })
        .collect();
    SlidingDataset::from_samples(n.max(1), samples)
}

fn random_kernel<R: Rng>(rng: &mut R) -> KernelParams {
    KernelParams::new(
        rng.gen_range(0.3..3.0),
        rng.gen_range(0.5..3.0),
        rng.gen_range(0.05..0.5),
    )
}

/// Posterior of the target position at `t_star` by conditioning the joint
/// Gaussian of `(y, P(t_star))` through its precision matrix.
pub fn information_form_posterior(gp: &GpPosterior, t_star: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let batch = gp.batch();
    let kp = gp.params();
    let n = batch.len();
    let g = batch.g_matrix();
    let times: Vec<f64> = batch.times.iter().copied().chain([t_star]).collect();
    let mut k_plus = DMatrix::zeros(2 * n + 2, 2 * n + 2);
    for i in 0..=n {
        for j in 0..=n {
            let v = kernel_eval(times[i], times[j], kp);
            k_plus[(2 * i, 2 * j)] = v;
            k_plus[(2 * i + 1, 2 * j + 1)] = v;
        }
    }
    let mut lift = DMatrix::zeros(n + 2, 2 * n + 2);
    lift.view_mut((0, 0), (n, 2 * n)).copy_from(&g);
    lift[(n, 2 * n)] = 1.0;
    lift[(n + 1, 2 * n + 1)] = 1.0;
    let mut joint = &lift * k_plus * lift.transpose();
    for i in 0..n {
        joint[(i, i)] += 2.0 * kp.noise_var;
    }
    let precision = joint
        .lu()
        .try_inverse()
        .expect("joint covariance is positive definite");
    let q_pp = precision.view((n, n), (2, 2)).into_owned();
    let q_py = precision.view((n, 0), (2, n)).into_owned();
    let cov = q_pp
        .try_inverse()
        .expect("2x2 precision block is invertible");
    let mean = -&cov * q_py * &batch.y;
    (
        Vector2::new(mean[0], mean[1]),
        Matrix2::new(cov[(0, 0)], cov[(0, 1)], cov[(1, 0)], cov[(1, 1)]),
    )
}

/// Posterior mean and covariance against [`information_form_posterior`].
pub fn gp_oracle(cases: usize, seed: u64) -> CheckResult {
    let clock = Instant::now();
    let mut rng = seeded_stream(seed, 14);
    let (mut mean_rel, mut cov_rel): (f64, f64) = (0.0, 0.0);
    for _ in 0..cases {
        let n = rng.gen_range(1..=20);
        let d = random_dataset(&mut rng, n);
        let kp = random_kernel(&mut rng);
        let gp = match build_posterior(&d, &kp) {
            Ok(gp) => gp,
            Err(e) => return finish("GP oracle", clock, false, e.to_string()),
        };
        let t_star = rng.gen_range(0.0..14.0);
        let (m, c) = gp.predict(t_star);
        let (m_ref, c_ref) = information_form_posterior(&gp, t_star);
        mean_rel = mean_rel.max((m - m_ref).norm() / m_ref.norm().max(1e-3));
        cov_rel = cov_rel.max((c - c_ref).norm() / c_ref.norm());
    }
    finish(
        "GP oracle",
        clock,
        mean_rel <= 1e-8 && cov_rel <= 1e-8,
        format!("{cases} datasets, rel err mean {mean_rel:.1e}, cov {cov_rel:.1e}"),
    )
}

/// A dataset on which `||Sigma(t)|| > sigma_bar(t)^2`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundViolation {
    pub case: usize,
    pub t: f64,
    pub cov_norm: f64,
    pub sigma_bar_sq: f64,
    pub kernel: KernelParams,
    pub samples: Vec<BearingSample>,
}

/// Positive definite posterior covariance and the norm inequality
/// `||Sigma(t)|| <= sigma_bar(t)^2` on random datasets. Returns the check and
/// every violating dataset.
pub fn bound_norm(cases: usize, seed: u64) -> (CheckResult, Vec<BoundViolation>) {
    let clock = Instant::now();
    let mut rng = seeded_stream(seed, 15);
    let mut violations = Vec::new();
    let mut min_eig = f64::INFINITY;
    for case in 0..cases {
        let n = rng.gen_range(1..=20);
        let d = random_dataset(&mut rng, n);
        let kp = KernelParams::new(
            rng.gen_range(0.3..3.0),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.001..0.1),
        );
        let gp = match build_posterior(&d, &kp) {
            Ok(gp) => gp,
            Err(e) => {
                return (
                    finish("bound norm", clock, false, e.to_string()),
                    violations,
                )
            }
        };
        let t_last = d.newest().map_or(0.0, |s| s.t);
        let queries: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..t_last + 2.0)).collect();
        for b in error_bound(&gp, &queries, 0.05, &d) {
            let (_, cov) = gp.predict(b.t);
            min_eig = min_eig.min(cov.symmetric_eigen().eigenvalues.min());
            let norm = sym2_norm(&cov);
            if norm > b.sigma_bar * b.sigma_bar * (1.0 + 1e-12) {
                violations.push(BoundViolation {
                    case,
                    t: b.t,
                    cov_norm: norm,
                    sigma_bar_sq: b.sigma_bar * b.sigma_bar,
                    kernel: kp,
                    samples: d.samples().cloned().collect(),
                });
            }
        }
    }
    let passed = violations.is_empty() && min_eig > 0.0;
    let detail = format!(
        "{cases} datasets, {} violations, min eigenvalue {min_eig:.2e}",
        violations.len()
    );
    (finish("bound norm", clock, passed, detail), violations)
}

/// Per-term UT similarity against a Monte-Carlo mean of `mc_samples` draws.
pub fn ut_fidelity(cases: usize, horizon: usize, mc_samples: usize, seed: u64) -> CheckResult {
    let clock = Instant::now();
    let mut rng = seeded_stream(seed, 16);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_gap: f64 = 0.0;
    let mut terms = 0;
    for _ in 0..cases {
        for _ in 0..horizon {
            let mu = Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let cov = random_psd(&mut rng, 0.5);
            let range = rng.gen_range(1.5..4.0);
            let p_auv = mu - random_unit(&mut rng) * range;
            let desired = random_unit(&mut rng);
            let set = sigma_points(&mu, &cov, 1.0).expect("PSD input");
            let Ok(ut) = alignment_term(&p_auv, &desired, &set) else {
                return finish("UT fidelity", clock, false, "sigma point on the AUV".into());
            };
            let chol = cov.cholesky().map(|c| c.l()).unwrap_or_else(|| {
                let (v, w) = crate::linalg::sym2_eigen(&cov);
                w * Matrix2::from_diagonal(&v.map(|x| x.max(0.0).sqrt()))
            });
            let (mut sum, mut sum2) = (0.0, 0.0);
            for _ in 0..mc_samples {
                let z = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                let d = mu + chol * z - p_auv;
                let v = desired.dot(&d) / d.norm();
                sum += v;
                sum2 += v * v;
            }
            let n = mc_samples as f64;
            let mean = sum / n;
            let stderr = ((sum2 / n - mean * mean).max(0.0) / n).sqrt();
            let tol = (4.0 * stderr).max(0.05);
            worst_gap = worst_gap.max((ut - mean).abs());
            worst_excess = worst_excess.max((ut - mean).abs() - tol);
            terms += 1;
        }
    }
    finish(
        "UT fidelity",
        clock,
        worst_excess <= 0.0,
        format!("{terms} terms, max |UT - MC| = {worst_gap:.3e}"),
    )
}

/// Integrating the flatness wrench of random quadratic splines reproduces them.
pub fn flatness_round_trip(cases: usize, seed: u64) -> CheckResult {
    let clock = Instant::now();
    let mut rng = seeded_stream(seed, 17);
    let params = AuvParams::default();
    let (pieces, segment) = (5, 0.1);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let eta0 = Vector3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.1..3.1),
        );
        let nu0 = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-1.0..1.0),
        );
        let mut last = eta0;
        let endpoints: Vec<Vector3<f64>> = (0..pieces)
            .map(|_| {
                last += Vector3::new(
                    rng.gen_range(-0.15..0.15),
                    rng.gen_range(-0.15..0.15),
                    rng.gen_range(-0.2..0.2),
                );
                last
            })
            .collect();
        let traj = match solve_coefficients(&eta0, &nu0, &endpoints, segment, 0.0) {
            Ok(t) => t,
            Err(e) => return finish("flatness round trip", clock, false, e.to_string()),
        };
        let mut state = AuvState::new(eta0, nu0);
        for i in 0..pieces {
            let (t0, t1) = (i as f64 * segment, (i + 1) as f64 * segment);
            state = match integrate(
                &state,
                |t| traj.piece_wrench(i, t - t0, &params),
                t0,
                t1,
                DEFAULT_RK4_STEP,
                &params,
            ) {
                Ok(s) => s,
                Err(e) => return finish("flatness round trip", clock, false, e.to_string()),
            };
            let planned = traj.eval(t1).0;
            worst = worst.max((state.eta.xy() - planned.xy()).norm());
        }
    }
    finish(
        "flatness round trip",
        clock,
        worst <= 1e-4,
        format!("{cases} splines, max position gap {worst:.2e} m"),
    )
}

/// Bound-event violation frequency on GP-sampled targets, required `<= delta + 0.03`.
pub fn coverage(episodes: usize, seed: u64) -> CheckResult {
    let clock = Instant::now();
    let cfg = CoverageConfig {
        episodes,
        seed,
        ..CoverageConfig::default()
    };
    let r = coverage_run(&cfg);
    let freq = r.violation_frequency();
    finish(
        "coverage",
        clock,
        freq <= cfg.delta + 0.03,
        format!(
            "{} episodes, {} violations, {} failures, frequency {freq:.3}",
            r.episodes, r.violations, r.failures
        ),
    )
}

/// Runs the whole suite. `quick` shrinks the corpora for interactive use.
pub fn run_all(quick: bool) -> Vec<CheckResult> {
    let s = if quick { 10 } else { 1 };
    vec![
        optimal_bearing_sets(10_000 / s, 0),
        orthogonality_fuzz(1000 / s, 0),
        ut_moments(1000 / s, 0),
        gp_oracle(100, 0),
        bound_norm(1000 / s, 0).0,
        ut_fidelity(50 / s, 5, 100_000 / s, 0),
        flatness_round_trip(100, 0),
        coverage(if quick { 100 } else { 500 }, 0),
    ]
}

/// Fixed-width pass/fail table.
pub fn render_table(results: &[CheckResult]) -> String {
    let width = results
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:<6}  {:>8}  detail",
        "check", "result", "time (s)"
    );
    for r in results {
        let _ = writeln!(
            out,
            "{:<width$}  {:<6}  {:>8.2}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        );
    }
    out
}
