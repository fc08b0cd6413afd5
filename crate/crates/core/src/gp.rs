//! Gaussian-process tracking from pseudo-linear bearing equations.
//!
//! The target position is modelled as `P_T(t) ~ GP(0, k(t, t') I_2)` with a
//! squared-exponential `k`. Each bearing contributes one scalar equation
//! `y_i = lambda_bar_i^T P_T(t_i) + lambda_bar_i^T eps_i`, so the joint prior
//! of `(y, P_T(t*))` is Gaussian and the posterior is closed form:
//!
//! ```text
//! Omega_yy = G (K + s^2 I) G^T,   Omega_yP = G K*,
//! mu(t*)   = Omega_yP^T Omega_yy^-1 y
//! Sigma(t*) = k(t*, t*) I - Omega_yP^T Omega_yy^-1 Omega_yP
//! ```
//!
//! Because `k` is isotropic, `(G K G^T)_ij = k(t_i, t_j) lambda_bar_i . lambda_bar_j`
//! and `G G^T = 2 I`, so nothing of size `2N` is ever formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{GbtError, Result};
use crate::optim::{minimize, BfgsOptions};
use crate::sensing::{
    assemble_pseudo_linear, bearing_condition, cumulative_bearing_matrix, PseudoLinearBatch,
    SlidingDataset,
};

pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (0.05, 50.0);
pub const SIGNAL_VAR_BOUNDS: (f64, f64) = (1e-4, 1e4);

const TUNE_MAX_ITERS: usize = 50;
const TUNE_GRAD_TOL: f64 = 1e-6;
const TUNE_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// SE length scale (s).
    pub length_scale: f64,
    /// Signal variance `sigma_f^2`.
    pub signal_var: f64,
    /// Sensor noise variance `sigma_eps^2` (m^2). Held fixed.
    pub noise_var: f64,
}

impl KernelParams {
    pub fn new(length_scale: f64, signal_var: f64, sigma_eps: f64) -> Self {
        Self {
            length_scale,
            signal_var,
            noise_var: sigma_eps * sigma_eps,
        }
    }

    /// Copy with `l` and `sigma_f^2` clamped into the admissible box.
    pub fn clamped(&self) -> Self {
        Self {
            length_scale: self
                .length_scale
                .clamp(LENGTH_SCALE_BOUNDS.0, LENGTH_SCALE_BOUNDS.1),
            signal_var: self
                .signal_var
                .clamp(SIGNAL_VAR_BOUNDS.0, SIGNAL_VAR_BOUNDS.1),
            noise_var: self.noise_var,
        }
    }

    fn log_theta(&self) -> [f64; 2] {
        [self.length_scale.ln(), self.signal_var.ln()]
    }

    fn from_log_theta(theta: &[f64], noise_var: f64) -> Self {
        Self {
            length_scale: theta[0].exp(),
            signal_var: theta[1].exp(),
            noise_var,
        }
    }
}

/// `sigma_f^2 exp(-(t - t2)^2 / (2 l^2))`.
pub fn kernel_eval(t: f64, t2: f64, kp: &KernelParams) -> f64 {
    let d = (t - t2) / kp.length_scale;
    kp.signal_var * (-0.5 * d * d).exp()
}

/// Conditioned GP over one data window.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    batch: PseudoLinearBatch,
    params: KernelParams,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

fn omega_yy(batch: &PseudoLinearBatch, kp: &KernelParams) -> DMatrix<f64> {
    let n = batch.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v =
                kernel_eval(batch.times[i], batch.times[j], kp) * batch.rows[i].dot(&batch.rows[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] += 2.0 * kp.noise_var;
    }
    m
}

/// Cholesky with jitter escalation: plain first, then `1e-10 * tr/N` times 1, 10, 100, 1000.
fn factorize(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let n = m.nrows();
    let base = 1e-10 * m.trace() / n as f64;
    let mut jitter = base;
    for _ in 0..4 {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(jittered) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(GbtError::IllConditionedPrior {
        jitter: jitter / 10.0,
    })
}

pub fn build_posterior(data: &SlidingDataset, kp: &KernelParams) -> Result<GpPosterior> {
    let batch = assemble_pseudo_linear(data)?;
    GpPosterior::from_batch(batch, kp)
}

impl GpPosterior {
    pub fn from_batch(batch: PseudoLinearBatch, kp: &KernelParams) -> Result<Self> {
        if batch.is_empty() {
            return Err(GbtError::EmptyBatch);
        }
        let (chol, jitter) = factorize(&omega_yy(&batch, kp))?;
        let alpha = chol.solve(&batch.y);
        Ok(Self {
            batch,
            params: *kp,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn batch(&self) -> &PseudoLinearBatch {
        &self.batch
    }

    pub fn len(&self) -> usize {
        self.batch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batch.is_empty()
    }

    /// Diagonal jitter that was needed for the factorization (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor `L` with `L L^T = Omega_yy (+ jitter)`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Prior covariance of the pseudo measurements, `Omega_yy`.
    pub fn omega_yy(&self) -> DMatrix<f64> {
        omega_yy(&self.batch, &self.params)
    }

    /// `Omega_yP*` (N x 2).
    fn cross_cov(&self, t_star: f64) -> DMatrix<f64> {
        let n = self.batch.len();
        let mut m = DMatrix::zeros(n, 2);
        for (i, (row, t)) in self.batch.rows.iter().zip(&self.batch.times).enumerate() {
            let k = kernel_eval(*t, t_star, &self.params);
            m[(i, 0)] = k * row[0];
            m[(i, 1)] = k * row[1];
        }
        m
    }

    /// Posterior mean and covariance of the target position at `t_star`.
    pub fn predict(&self, t_star: f64) -> (Vector2<f64>, Matrix2<f64>) {
        let cross = self.cross_cov(t_star);
        let mean = cross.tr_mul(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&cross)
            .expect("Cholesky factor has a positive diagonal");
        let reduction = v.tr_mul(&v);
        let prior = kernel_eval(t_star, t_star, &self.params);
        let off = 0.5 * (reduction[(0, 1)] + reduction[(1, 0)]);
        let cov = Matrix2::new(
            prior - reduction[(0, 0)],
            -off,
            -off,
            prior - reduction[(1, 1)],
        );
        (Vector2::new(mean[0], mean[1]), cov)
    }

    /// `log p(y | t)` under the current hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.batch.len() as f64;
        let quad = self.batch.y.dot(&self.alpha);
        let log_det: f64 = self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
            * 2.0;
        -0.5 * quad - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

pub fn predict(gp: &GpPosterior, t_star: f64) -> (Vector2<f64>, Matrix2<f64>) {
    gp.predict(t_star)
}

pub fn log_marginal_likelihood(data: &SlidingDataset, kp: &KernelParams) -> Result<f64> {
    Ok(build_posterior(data, kp)?.log_marginal_likelihood())
}

fn lml_of_batch(batch: &PseudoLinearBatch, kp: &KernelParams) -> f64 {
    match factorize(&omega_yy(batch, kp)) {
        Ok((chol, _)) => {
            let alpha = chol.solve(&batch.y);
            let log_det: f64 = chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>()
                * 2.0;
            -0.5 * batch.y.dot(&alpha)
                - 0.5 * log_det
                - 0.5 * batch.len() as f64 * (2.0 * std::f64::consts::PI).ln()
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximizes the log marginal likelihood over `(log l, log sigma_f^2)` inside the box.
///
/// Windows with fewer than three samples return `warm_start` unchanged.
pub fn tune_hyperparameters(data: &SlidingDataset, warm_start: &KernelParams) -> KernelParams {
    if data.len() < 3 {
        return *warm_start;
    }
    let Ok(batch) = assemble_pseudo_linear(data) else {
        return *warm_start;
    };
    let start = warm_start.clamped();
    let noise_var = start.noise_var;
    let objective =
        |theta: &[f64]| -lml_of_batch(&batch, &KernelParams::from_log_theta(theta, noise_var));
    let opts = BfgsOptions::new(2, TUNE_MAX_ITERS, TUNE_GRAD_TOL, TUNE_FD_STEP).with_bounds(
        vec![LENGTH_SCALE_BOUNDS.0.ln(), SIGNAL_VAR_BOUNDS.0.ln()],
        vec![LENGTH_SCALE_BOUNDS.1.ln(), SIGNAL_VAR_BOUNDS.1.ln()],
    );
    let out = minimize(&objective, &start.log_theta(), &opts);
    if !out.value.is_finite() {
        log::warn!("hyperparameter objective is not finite; keeping the warm start");
        return *warm_start;
    }
    KernelParams::from_log_theta(&out.x, noise_var)
}

/// Probabilistic error bound at one query time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub t: f64,
    pub sigma_bar: f64,
    pub beta: f64,
    pub delta: f64,
    pub ccbm_value: f64,
    pub xi: f64,
}

impl BoundReport {
    /// `beta * sigma_bar`, the bound on the position error.
    pub fn radius(&self) -> f64 {
        self.beta * self.sigma_bar
    }
}

/// `sqrt(2 ln(|T| / delta))`.
pub fn beta(num_queries: usize, delta: f64) -> f64 {
    (2.0 * (num_queries as f64 / delta).ln()).sqrt()
}

/// Data-dependent error bound for every query time.
///
/// Maxima and minima over "the dataset" run over the window's sample times;
/// `N` is the current window length. A singular cumulative bearing matrix
/// drops the second term of `xi` (infinite condition number).
pub fn error_bound(
    gp: &GpPosterior,
    query_times: &[f64],
    delta: f64,
    data: &SlidingDataset,
) -> Vec<BoundReport> {
    assert!(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
    assert!(!data.is_empty(), "error bound needs a nonempty dataset");
    let kp = gp.params();
    let times = data.times();
    let n = times.len() as f64;
    let sigma2 = kp.noise_var;
    let max_k = times
        .iter()
        .map(|t| kernel_eval(*t, *t, kp))
        .fold(f64::NEG_INFINITY, f64::max);
    let p = cumulative_bearing_matrix(&data.bearings());
    let cond = bearing_condition(&p);
    let ccbm_value = cond.log10();
    let b = beta(query_times.len(), delta);
    query_times
        .iter()
        .map(|&ti| {
            let kii = kernel_eval(ti, ti, kp);
            let min_k2 = times
                .iter()
                .map(|t| kernel_eval(ti, *t, kp).powi(2))
                .fold(f64::INFINITY, f64::min);
            let xi = kii * max_k - if cond.is_finite() { min_k2 / cond } else { 0.0 };
            let sigma_bar = (2.0 * kii * sigma2 / (n * max_k) + xi / max_k)
                .max(0.0)
                .sqrt();
            BoundReport {
                t: ti,
                sigma_bar,
                beta: b,
                delta,
                ccbm_value,
                xi,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::BearingSample;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn one_sample(p_auv: Vector2<f64>) -> SlidingDataset {
        SlidingDataset::from_samples(
            20,
            [BearingSample {
                t: 0.0,
                bearing: Vector2::new(1.0, 0.0),
                p_auv,
            }],
        )
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize) -> SlidingDataset {
        let mut t = 0.0;
        let samples: Vec<_> = (0..n)
            .map(|_| {
                t += rng.gen_range(0.05..0.6);
                let th: f64 = rng.gen_range(-3.2..3.2);
                BearingSample {
                    t,
                    bearing: Vector2::new(th.cos(), th.sin()),
                    p_auv: Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                }
            })
            .collect();
        SlidingDataset::from_samples(n, samples)
    }

    #[test]
    fn kernel_examples() {
        let kp = KernelParams::new(1.5, 1.0, 0.1);
        assert_eq!(kernel_eval(0.7, 0.7, &kp), 1.0);
        assert_relative_eq!(kernel_eval(0.0, 1.5, &kp), (-0.5f64).exp(), epsilon = 1e-15);
        assert!((kernel_eval(0.2, 3.1, &kp) - kernel_eval(3.1, 0.2, &kp)).abs() <= 1e-15);
    }

    #[test]
    fn single_sample_posterior() {
        let kp = KernelParams::new(1.0, 1.0, 0.1);
        let gp = build_posterior(&one_sample(Vector2::new(0.0, -1.0)), &kp).unwrap();
        assert_relative_eq!(gp.omega_yy()[(0, 0)], 2.02, epsilon = 1e-12);
        assert_relative_eq!(gp.batch().y[0], SQRT_2, epsilon = 1e-12);
        let (mean, cov) = gp.predict(0.0);
        assert_relative_eq!(mean, Vector2::new(0.0, -2.0 / 2.02), epsilon = 1e-12);
        assert_relative_eq!(
            cov,
            Matrix2::new(1.0, 0.0, 0.0, 1.0 - 2.0 / 2.02),
            epsilon = 1e-12
        );
        let lml = gp.log_marginal_likelihood();
        let expected =
            -0.5 * (2.0 / 2.02) - 0.5 * 2.02f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(lml, expected, epsilon = 1e-12);
        assert!((lml - -1.7655).abs() < 1e-4);
    }

    #[test]
    fn zero_measurements_maximize_quadratic_term() {
        let kp = KernelParams::new(1.0, 1.0, 0.1);
        let lml_zero = log_marginal_likelihood(&one_sample(Vector2::zeros()), &kp).unwrap();
        let lml_far = log_marginal_likelihood(&one_sample(Vector2::new(0.0, -1.0)), &kp).unwrap();
        assert!(lml_zero > lml_far);
        let expected = -0.5 * 2.02f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(lml_zero, expected, epsilon = 1e-12);
    }

    #[test]
    fn noise_identity_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..=20);
            let d = random_dataset(&mut rng, n);
            let kp = KernelParams::new(
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.2..5.0),
                rng.gen_range(0.001..0.3),
            );
            let gp = build_posterior(&d, &kp).unwrap();
            let batch = gp.batch();
            let g = batch.g_matrix();
            let mut k = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    let v = kernel_eval(batch.times[i], batch.times[j], &kp);
                    k[(2 * i, 2 * j)] = v;
                    k[(2 * i + 1, 2 * j + 1)] = v;
                }
            }
            let diff = gp.omega_yy()
                - &g * k * g.transpose()
                - DMatrix::identity(n, n) * (2.0 * kp.noise_var);
            assert!(diff.amax() < 1e-10);
            let min_eig = gp.omega_yy().symmetric_eigenvalues().min();
            assert!(min_eig >= 2.0 * kp.noise_var - 1e-9);
            let l = gp.cholesky_factor();
            let rel = (&l * l.transpose() - gp.omega_yy()).amax() / gp.omega_yy().amax();
            assert!(rel < 1e-8);
        }
    }

    #[test]
    fn far_future_recovers_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_dataset(&mut rng, 10);
        let kp = KernelParams::new(0.5, 2.0, 0.01);
        let (mean, cov) = build_posterior(&d, &kp).unwrap().predict(1e4);
        assert!(mean.norm() < 1e-12);
        assert_relative_eq!(cov, Matrix2::identity() * 2.0, epsilon = 1e-12);
    }

    /// Joint Gaussian of `(y, P*)` assembled densely and conditioned through its precision matrix.
    fn information_form(gp: &GpPosterior, t_star: f64) -> (Vector2<f64>, Matrix2<f64>) {
        let batch = gp.batch();
        let kp = gp.params();
        let n = batch.len();
        let g = batch.g_matrix();
        let mut k_plus = DMatrix::zeros(2 * n + 2, 2 * n + 2);
        let times: Vec<f64> = batch.times.iter().copied().chain([t_star]).collect();
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
        let precision = joint.lu().try_inverse().unwrap();
        let q_pp = precision.view((n, n), (2, 2)).into_owned();
        let q_py = precision.view((n, 0), (2, n)).into_owned();
        let cov = q_pp.try_inverse().unwrap();
        let mean = -&cov * q_py * &batch.y;
        (
            Vector2::new(mean[0], mean[1]),
            Matrix2::new(cov[(0, 0)], cov[(0, 1)], cov[(1, 0)], cov[(1, 1)]),
        )
    }

    #[test]
    fn posterior_matches_information_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..=20);
            let d = random_dataset(&mut rng, n);
            let kp = KernelParams::new(
                rng.gen_range(0.3..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.05..0.5),
            );
            let gp = build_posterior(&d, &kp).unwrap();
            let t_star = rng.gen_range(0.0..12.0);
            let (m, c) = gp.predict(t_star);
            let (m_ref, c_ref) = information_form(&gp, t_star);
            assert!(
                (m - m_ref).norm() <= 1e-8 * m_ref.norm().max(1e-3),
                "{m} vs {m_ref}"
            );
            assert!((c - c_ref).norm() <= 1e-8 * c_ref.norm(), "{c} vs {c_ref}");
        }
    }

    #[test]
    fn axis_aligned_bearings_reduce_to_scalar_gp() {
        // Alternating [1,0] / [0,1] bearings observe y and x respectively.
        let kp = KernelParams::new(0.8, 1.3, 0.05);
        let mut samples = Vec::new();
        for i in 0..12 {
            let t = 0.1 * i as f64;
            let bearing = if i % 2 == 0 {
                Vector2::new(1.0, 0.0)
            } else {
                Vector2::new(0.0, 1.0)
            };
            let p_auv = Vector2::new((t * 3.0).sin() * 2.0, (t * 2.0).cos() - 0.5);
            samples.push(BearingSample { t, bearing, p_auv });
        }
        let d = SlidingDataset::from_samples(20, samples.clone());
        let gp = build_posterior(&d, &kp).unwrap();
        // Scalar GP per coordinate: observation z_i = coordinate with noise variance sigma^2.
        let scalar = |axis: usize, t_star: f64| -> (f64, f64) {
            let obs: Vec<(f64, f64)> = samples
                .iter()
                .filter(|s| (s.bearing[0] == 1.0) == (axis == 1))
                .map(|s| (s.t, s.p_auv[axis]))
                .collect();
            let m = obs.len();
            let kmat = DMatrix::from_fn(m, m, |i, j| {
                kernel_eval(obs[i].0, obs[j].0, &kp) + if i == j { kp.noise_var } else { 0.0 }
            });
            let kstar = DVector::from_fn(m, |i, _| kernel_eval(obs[i].0, t_star, &kp));
            let z = DVector::from_fn(m, |i, _| obs[i].1);
            let inv = kmat.try_inverse().unwrap();
            let mean = kstar.dot(&(&inv * z));
            let var = kernel_eval(t_star, t_star, &kp) - kstar.dot(&(&inv * &kstar));
            (mean, var)
        };
        for t_star in [0.0, 0.35, 1.0, 1.7] {
            let (m, c) = gp.predict(t_star);
            for axis in 0..2 {
                let (sm, sv) = scalar(axis, t_star);
                assert!(
                    (m[axis] - sm).abs() < 1e-8,
                    "axis {axis}: {} vs {sm}",
                    m[axis]
                );
                assert!((c[(axis, axis)] - sv).abs() < 1e-8);
            }
            assert!(c[(0, 1)].abs() < 1e-12);
        }
    }

    #[test]
    fn lml_gradient_matches_central_differences() {
        // Analytic d/dl of the LML: 0.5 tr((alpha alpha^T - Omega^-1) dOmega/dl).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let d = random_dataset(&mut rng, 15);
            let kp = KernelParams::new(rng.gen_range(0.3..3.0), rng.gen_range(0.5..2.0), 0.05);
            let gp = build_posterior(&d, &kp).unwrap();
            let b = gp.batch();
            let n = b.len();
            let domega = DMatrix::from_fn(n, n, |i, j| {
                let dt = b.times[i] - b.times[j];
                kernel_eval(b.times[i], b.times[j], &kp) * dt * dt / kp.length_scale.powi(3)
                    * b.rows[i].dot(&b.rows[j])
            });
            let alpha = gp.omega_yy().try_inverse().unwrap() * &b.y;
            let inner = &alpha * alpha.transpose() - gp.omega_yy().try_inverse().unwrap();
            let analytic = 0.5 * (inner * domega).trace();
            let h = 1e-5 * kp.length_scale;
            let f = |l: f64| {
                log_marginal_likelihood(
                    &d,
                    &KernelParams {
                        length_scale: l,
                        ..kp
                    },
                )
                .unwrap()
            };
            let numeric = (f(kp.length_scale + h) - f(kp.length_scale - h)) / (2.0 * h);
            assert!(
                (analytic - numeric).abs() <= 1e-5 * analytic.abs().max(1.0),
                "{analytic} vs {numeric}"
            );
        }
    }

    #[test]
    fn tuning_ascends_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let d = random_dataset(&mut rng, 20);
            let start = KernelParams::new(1.0, 1.0, 0.01);
            let tuned = tune_hyperparameters(&d, &start);
            let before = log_marginal_likelihood(&d, &start).unwrap();
            let after = log_marginal_likelihood(&d, &tuned).unwrap();
            assert!(after >= before - 1e-9);
            let again = tune_hyperparameters(&d, &tuned);
            assert!((again.length_scale.ln() - tuned.length_scale.ln()).abs() < 1e-3);
            assert!((again.signal_var.ln() - tuned.signal_var.ln()).abs() < 1e-3);
        }
    }

    #[test]
    fn tuning_small_windows_is_identity() {
        let d = one_sample(Vector2::new(1.0, 1.0));
        let start = KernelParams::new(2.0, 3.0, 0.01);
        assert_eq!(tune_hyperparameters(&d, &start), start);
    }

    #[test]
    fn beta_value() {
        assert!((beta(12, 0.05) - 3.3108).abs() < 1e-4);
    }

    #[test]
    fn bound_with_isotropic_bearings() {
        // Perpendicular bearings at two times: cond(P) = 1.
        let d = SlidingDataset::from_samples(
            20,
            [
                BearingSample {
                    t: 0.0,
                    bearing: Vector2::new(1.0, 0.0),
                    p_auv: Vector2::zeros(),
                },
                BearingSample {
                    t: 0.1,
                    bearing: Vector2::new(0.0, 1.0),
                    p_auv: Vector2::zeros(),
                },
            ],
        );
        let kp = KernelParams::new(1.0, 1.0, 0.001);
        let gp = build_posterior(&d, &kp).unwrap();
        let r = error_bound(&gp, &[0.0, 0.1], 0.05, &d);
        for rep in &r {
            let min_k2 = d
                .times()
                .iter()
                .map(|t| kernel_eval(rep.t, *t, &kp).powi(2))
                .fold(f64::INFINITY, f64::min);
            assert_relative_eq!(rep.xi, 1.0 - min_k2, epsilon = 1e-14);
            assert!(rep.xi >= 0.0);
            assert_eq!(rep.ccbm_value, 0.0);
        }
    }

    #[test]
    fn bound_with_singular_geometry() {
        let b = Vector2::new(0.6, 0.8);
        let d = SlidingDataset::from_samples(
            20,
            (0..5).map(|i| BearingSample {
                t: i as f64 * 0.1,
                bearing: b,
                p_auv: Vector2::zeros(),
            }),
        );
        let kp = KernelParams::new(1.0, 2.0, 0.001);
        let gp = build_posterior(&d, &kp).unwrap();
        for rep in error_bound(&gp, &[0.2, 0.9], 0.05, &d) {
            assert_relative_eq!(rep.xi, 4.0, epsilon = 1e-12);
            assert_eq!(rep.ccbm_value, f64::INFINITY);
        }
    }
}
