//! Comparison estimators and vehicle behaviours.
//!
//! - pseudo-linear Kalman filter with a constant-velocity target model,
//! - polynomial regression of the target track on the pseudo-linear rows,
//! - static, random and direct-placement motion policies.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, RowVector4, Vector2, Vector3, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GbtError, Result};
use crate::sensing::{orth_complement, BearingSample, SlidingDataset};
use crate::vehicle::{AuvParams, AuvState, Wrench};

/// Range used to seed estimators before the bearings can be triangulated (m).
pub const FALLBACK_RANGE: f64 = 2.0;

/// `p_auv + FALLBACK_RANGE * bearing`: a point on the latest bearing ray.
pub fn ray_guess(sample: &BearingSample) -> Vector2<f64> {
    sample.p_auv + sample.bearing * FALLBACK_RANGE
}

/// Constant-velocity state `[p_T; v_T]` with covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlkfState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl PlkfState {
    /// Position from two bearings (velocity zero, covariance `diag(10, 10, 4, 4)`).
    ///
    /// Nearly parallel bearings (`|det| < 0.05` of the 2x2 pseudo-linear system)
    /// fall back to [`ray_guess`] on the newer sample.
    pub fn triangulate(first: &BearingSample, second: &BearingSample) -> Self {
        let g1 = orth_complement(&first.bearing);
        let g2 = orth_complement(&second.bearing);
        let a = Matrix2::new(g1[0], g1[1], g2[0], g2[1]);
        let b = Vector2::new(g1.dot(&first.p_auv), g2.dot(&second.p_auv));
        let p = match a.try_inverse() {
            Some(inv) if a.determinant().abs() >= 0.05 => inv * b,
            _ => ray_guess(second),
        };
        Self {
            mean: Vector4::new(p[0], p[1], 0.0, 0.0),
            cov: Matrix4::from_diagonal(&Vector4::new(10.0, 10.0, 4.0, 4.0)),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    /// Constant-velocity extrapolation of the mean to `dt` seconds ahead.
    pub fn predict_position(&self, dt: f64) -> Vector2<f64> {
        Vector2::new(
            self.mean[0] + dt * self.mean[2],
            self.mean[1] + dt * self.mean[3],
        )
    }
}

fn cv_transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn cv_process_noise(dt: f64, q: f64) -> Matrix4<f64> {
    let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        m[(i, i)] = a * q;
        m[(i, i + 2)] = b * q;
        m[(i + 2, i)] = b * q;
        m[(i + 2, i + 2)] = c * q;
    }
    m
}

/// One predict/update cycle: constant-velocity prediction over `dt`, then a
/// scalar pseudo-linear update with `H = [lambda_bar^T, 0, 0]` and `R = 2 sigma^2`
/// (Joseph-form covariance).
pub fn plkf_step(
    s: &PlkfState,
    sample: &BearingSample,
    dt: f64,
    q_accel: f64,
    sigma_eps: f64,
) -> Result<PlkfState> {
    let f = cv_transition(dt);
    let mean = f * s.mean;
    let cov = f * s.cov * f.transpose() + cv_process_noise(dt, q_accel);
    let g = orth_complement(&sample.bearing);
    let h = RowVector4::new(g[0], g[1], 0.0, 0.0);
    let r = 2.0 * sigma_eps * sigma_eps;
    let innovation_var = (h * cov * h.transpose())[0] + r;
    if !(innovation_var > 0.0) {
        return Err(GbtError::FilterDegenerate(innovation_var));
    }
    let gain = cov * h.transpose() / innovation_var;
    let innovation = g.dot(&sample.p_auv) - (h * mean)[0];
    let ikh = Matrix4::identity() - gain * h;
    let cov = ikh * cov * ikh.transpose() + gain * gain.transpose() * r;
    Ok(PlkfState {
        mean: mean + gain * innovation,
        cov: 0.5 * (cov + cov.transpose()),
    })
}

/// Per-axis polynomial track fitted to pseudo-linear rows, in time centred at `t_center`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub order: usize,
    /// Row 0: x coefficients, row 1: y coefficients, ascending powers.
    pub coeffs: DMatrix<f64>,
    pub t_center: f64,
    pub window: (f64, f64),
}

impl PolyFit {
    pub fn predict(&self, t: f64) -> Vector2<f64> {
        let tau = t - self.t_center;
        let mut p = Vector2::zeros();
        let mut pow = 1.0;
        for j in 0..=self.order {
            p[0] += self.coeffs[(0, j)] * pow;
            p[1] += self.coeffs[(1, j)] * pow;
            pow *= tau;
        }
        p
    }
}

/// Least squares `y_i = lambda_bar_i^T [poly_x(t_i); poly_y(t_i)]` over the window.
pub fn poly_fit(data: &SlidingDataset, order: usize) -> Result<PolyFit> {
    let n = data.len();
    let unknowns = 2 * (order + 1);
    if n < unknowns {
        return Err(GbtError::DegenerateGeometry);
    }
    let (t0, t1) = (data.oldest().unwrap().t, data.newest().unwrap().t);
    let t_center = 0.5 * (t0 + t1);
    poly_fit_centered(data, order, t_center)
}

/// [`poly_fit`] with an explicit centring time.
pub fn poly_fit_centered(data: &SlidingDataset, order: usize, t_center: f64) -> Result<PolyFit> {
    let n = data.len();
    let unknowns = 2 * (order + 1);
    if n < unknowns {
        return Err(GbtError::DegenerateGeometry);
    }
    let mut a = DMatrix::zeros(n, unknowns);
    let mut b = DVector::zeros(n);
    for (i, s) in data.samples().enumerate() {
        let g = orth_complement(&s.bearing);
        let tau = s.t - t_center;
        let mut pow = 1.0;
        for j in 0..=order {
            a[(i, j)] = g[0] * pow;
            a[(i, order + 1 + j)] = g[1] * pow;
            pow *= tau;
        }
        b[i] = g.dot(&s.p_auv);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(GbtError::DegenerateGeometry);
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|_| GbtError::DegenerateGeometry)?;
    let mut coeffs = DMatrix::zeros(2, order + 1);
    for j in 0..=order {
        coeffs[(0, j)] = x[j];
        coeffs[(1, j)] = x[order + 1 + j];
    }
    Ok(PolyFit {
        order,
        coeffs,
        t_center,
        window: (data.oldest().unwrap().t, data.newest().unwrap().t),
    })
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum MotionMode {
    /// Trajectory optimization (the full tracking loop).
    #[default]
    Gbt,
    Static,
    Random,
    DirectPlacement,
}

impl MotionMode {
    pub fn name(&self) -> &'static str {
        match self {
            MotionMode::Gbt => "gbt",
            MotionMode::Static => "static",
            MotionMode::Random => "random",
            MotionMode::DirectPlacement => "direct_placement",
        }
    }
}

/// What a non-planning policy does over one control interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyAction {
    Hold(Wrench),
    Place(AuvState),
}

/// Wrench drawn uniformly inside the limits, one draw per channel.
pub fn random_wrench<R: Rng + ?Sized>(params: &AuvParams, rng: &mut R) -> Wrench {
    Wrench(Vector3::from_fn(|i, _| {
        rng.gen_range(params.tau_min[i]..params.tau_max[i])
    }))
}

/// Pose at `mean_next - r0 * desired_next`, facing the predicted target, at rest.
pub fn placement_pose(
    mean_next: &Vector2<f64>,
    desired_next: &Vector2<f64>,
    r0: f64,
    current_psi: f64,
) -> AuvState {
    let p = mean_next - desired_next * r0;
    let heading = desired_next[1].atan2(desired_next[0]);
    let psi = current_psi + crate::planner::wrap_angle(heading - current_psi);
    AuvState::at_rest(p[0], p[1], psi)
}

/// Action of a non-planning behaviour. `placement` carries
/// `(mean at t_{k+1}, desired bearing at t_{k+1}, standoff)` for direct placement.
pub fn motion_policy<R: Rng + ?Sized>(
    mode: MotionMode,
    state: &AuvState,
    params: &AuvParams,
    rng: &mut R,
    placement: Option<(Vector2<f64>, Vector2<f64>, f64)>,
) -> PolicyAction {
    match mode {
        MotionMode::Static | MotionMode::Gbt => PolicyAction::Hold(Wrench::zero()),
        MotionMode::Random => PolicyAction::Hold(random_wrench(params, rng)),
        MotionMode::DirectPlacement => {
            let (mean, desired, r0) = placement.expect("direct placement needs a predicted target");
            PolicyAction::Place(placement_pose(&mean, &desired, r0, state.eta[2]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::measure_bearing;
    use crate::vehicle::integrate;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle_samples(
        target: impl Fn(f64) -> Vector2<f64>,
        n: usize,
        sigma: f64,
        seed: u64,
    ) -> Vec<BearingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|k| {
                let t = k as f64 * 0.1;
                let p_auv = target(t) + Vector2::new((2.0 * t).cos(), (2.0 * t).sin()) * 2.0;
                let bearing = measure_bearing(&target(t), &p_auv, sigma, &mut rng).unwrap();
                BearingSample { t, bearing, p_auv }
            })
            .collect()
    }

    #[test]
    fn consistent_measurement_leaves_mean_on_ray() {
        let target = Vector2::new(1.0, -0.5);
        let samples = circle_samples(|_| target, 3, 0.0, 0);
        let s = PlkfState {
            mean: Vector4::new(target[0], target[1], 0.0, 0.0),
            cov: Matrix4::identity(),
        };
        let next = plkf_step(&s, &samples[1], 0.1, 0.0, 0.0).unwrap();
        assert_relative_eq!(next.mean, s.mean, epsilon = 1e-12);
    }

    #[test]
    fn plkf_tracks_constant_velocity() {
        let target = |t: f64| Vector2::new(-1.0 + 0.5 * t, -1.0 + 0.5 * t);
        let samples = circle_samples(target, 200, 0.001, 3);
        let mut s = PlkfState::triangulate(&samples[0], &samples[1]);
        for sample in &samples[2..] {
            s = plkf_step(&s, sample, 0.1, 0.1, 0.001).unwrap();
        }
        assert!((s.position() - target(19.9)).norm() < 0.3);
    }

    #[test]
    fn plkf_covariance_stays_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = PlkfState {
            mean: Vector4::zeros(),
            cov: Matrix4::from_diagonal(&Vector4::new(10.0, 10.0, 4.0, 4.0)),
        };
        for k in 0..10_000 {
            let th: f64 = rng.gen_range(-3.2..3.2);
            let sample = BearingSample {
                t: k as f64 * 0.1,
                bearing: Vector2::new(th.cos(), th.sin()),
                p_auv: Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
            };
            s = plkf_step(&s, &sample, 0.1, 0.1, 0.001).unwrap();
            assert_eq!(s.cov, s.cov.transpose());
        }
        let eig = s.cov.symmetric_eigenvalues();
        assert!(eig.min() > -1e-12);
    }

    #[test]
    fn degenerate_filter_reports() {
        let s = PlkfState {
            mean: Vector4::zeros(),
            cov: Matrix4::zeros(),
        };
        let sample = BearingSample {
            t: 0.0,
            bearing: Vector2::new(1.0, 0.0),
            p_auv: Vector2::zeros(),
        };
        assert!(matches!(
            plkf_step(&s, &sample, 0.0, 0.0, 0.0),
            Err(GbtError::FilterDegenerate(_))
        ));
    }

    #[test]
    fn poly_fit_recovers_line() {
        let target = |t: f64| Vector2::new(-1.0 + 0.5 * t, 2.0 - 0.3 * t);
        let d = SlidingDataset::from_samples(20, circle_samples(target, 20, 0.0, 0));
        for order in [1, 4] {
            let fit = poly_fit(&d, order).unwrap();
            for t in [0.0, 0.7, 1.9] {
                assert!((fit.predict(t) - target(t)).norm() < 1e-8);
            }
            let c = fit.t_center;
            assert!(
                (fit.coeffs[(0, 1)] - 0.5).abs() < 1e-8 && (fit.coeffs[(1, 1)] + 0.3).abs() < 1e-8
            );
            assert!((fit.coeffs[(0, 0)] - target(c)[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn poly_fit_rejects_parallel_bearings() {
        let b = Vector2::new(0.6, 0.8);
        let d = SlidingDataset::from_samples(
            20,
            (0..20).map(|k| BearingSample {
                t: k as f64 * 0.1,
                bearing: b,
                p_auv: Vector2::new(k as f64 * 0.06, k as f64 * 0.08),
            }),
        );
        assert_eq!(poly_fit(&d, 4), Err(GbtError::DegenerateGeometry));
        let short =
            SlidingDataset::from_samples(20, circle_samples(|_| Vector2::zeros(), 5, 0.0, 0));
        assert_eq!(poly_fit(&short, 4), Err(GbtError::DegenerateGeometry));
    }

    #[test]
    fn poly_fit_residuals_at_noise_scale() {
        let target = |t: f64| Vector2::new((0.4 * t).sin(), 0.2 * t * t);
        let d = SlidingDataset::from_samples(20, circle_samples(target, 20, 0.001, 4));
        let fit = poly_fit(&d, 4).unwrap();
        for s in d.samples() {
            let g = orth_complement(&s.bearing);
            let r = g.dot(&s.p_auv) - g.dot(&fit.predict(s.t));
            assert!(r.abs() < 5.0 * 2f64.sqrt() * 0.001, "{r}");
        }
    }

    #[test]
    fn poly_fit_centering_invariance() {
        let target = |t: f64| Vector2::new((0.4 * t).sin(), 0.2 * t * t - 1.0);
        let d = SlidingDataset::from_samples(20, circle_samples(target, 20, 0.001, 5));
        let a = poly_fit(&d, 4).unwrap();
        let b = poly_fit_centered(&d, 4, 0.3).unwrap();
        for t in [0.0, 1.0, 2.2] {
            assert!((a.predict(t) - b.predict(t)).norm() < 1e-7);
        }
    }

    #[test]
    fn static_policy_never_moves() {
        let p = AuvParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = AuvState::at_rest(1.5, 0.0, 1.0);
        for k in 0..20 {
            let PolicyAction::Hold(w) = motion_policy(MotionMode::Static, &s, &p, &mut rng, None)
            else {
                panic!()
            };
            s = integrate(&s, |_| w, k as f64 * 0.1, (k + 1) as f64 * 0.1, 1e-3, &p).unwrap();
        }
        assert_eq!(s, AuvState::at_rest(1.5, 0.0, 1.0));
    }

    #[test]
    fn random_policy_is_reproducible_and_bounded() {
        let p = AuvParams::default();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| random_wrench(&p, &mut rng))
                .collect::<Vec<_>>()
        };
        let a = draw(9);
        assert_eq!(a, draw(9));
        for w in &a {
            for i in 0..3 {
                assert!(w.0[i] >= p.tau_min[i] && w.0[i] < p.tau_max[i]);
            }
        }
    }

    #[test]
    fn placement_samples_desired_bearing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = Vector2::new(0.3, -0.4);
        let desired = Vector2::new(0.0, 1.0);
        let r0 = 1.5;
        let pose = placement_pose(&target, &desired, r0, 0.0);
        for _ in 0..100 {
            let b = measure_bearing(&target, &pose.position(), 0.001, &mut rng).unwrap();
            let angle = b.perp(&desired).atan2(b.dot(&desired)).abs();
            assert!(angle <= 4.0 * 0.001 / r0);
        }
        assert_relative_eq!(pose.eta[2], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }
}
