//! 3-DOF Fossen model of the vehicle in the horizontal plane.
//!
//! ```text
//! eta_dot = J(psi) nu
//! M nu_dot + C(nu) nu + D(nu) nu = tau
//! ```
//!
//! with `eta = [x, y, psi]`, `nu = [u, v, r]`, diagonal inertia including
//! added mass, and linear plus quadratic diagonal damping. The flat output
//! is `z = eta`, so states and wrench are algebraic in `(z, z_dot, z_ddot)`.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{GbtError, Result};

/// Default RK4 step used inside each control interval.
pub const DEFAULT_RK4_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuvParams {
    pub mass: f64,
    pub inertia_z: f64,
    pub added_mass_u: f64,
    pub added_mass_v: f64,
    pub added_mass_r: f64,
    pub linear_damping_u: f64,
    pub linear_damping_v: f64,
    pub linear_damping_r: f64,
    pub quadratic_damping_u: f64,
    pub quadratic_damping_v: f64,
    pub quadratic_damping_r: f64,
    /// Upper wrench limits `[F_u, F_v, F_r]` (N, N, N m).
    pub tau_max: [f64; 3],
    /// Lower wrench limits `[F_u, F_v, F_r]` (N, N, N m).
    pub tau_min: [f64; 3],
}

impl Default for AuvParams {
    /// Identified model of the Falcon vehicle.
    fn default() -> Self {
        Self {
            mass: 116.0,
            inertia_z: 13.1,
            added_mass_u: -167.6,
            added_mass_v: -477.2,
            added_mass_r: -15.9,
            linear_damping_u: 26.9,
            linear_damping_v: 35.8,
            linear_damping_r: 3.5,
            quadratic_damping_u: 241.3,
            quadratic_damping_v: 503.8,
            quadratic_damping_r: 76.9,
            tau_max: [5000.0, 5000.0, 1500.0],
            tau_min: [-5000.0, -5000.0, -1500.0],
        }
    }
}

impl AuvParams {
    /// Inertia terms including added mass, `[M_x, M_y, M_psi]`.
    pub fn inertia(&self) -> Vector3<f64> {
        Vector3::new(
            self.mass - self.added_mass_u,
            self.mass - self.added_mass_v,
            self.inertia_z - self.added_mass_r,
        )
    }

    pub fn tau_max(&self) -> Vector3<f64> {
        Vector3::from(self.tau_max)
    }

    pub fn tau_min(&self) -> Vector3<f64> {
        Vector3::from(self.tau_min)
    }

    /// Same vehicle with both wrench limits multiplied by `scale`.
    pub fn with_limit_scale(&self, scale: f64) -> Self {
        let mut p = *self;
        for i in 0..3 {
            p.tau_max[i] *= scale;
            p.tau_min[i] *= scale;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mass", self.mass),
            ("inertia_z", self.inertia_z),
            ("linear_damping_u", self.linear_damping_u),
            ("linear_damping_v", self.linear_damping_v),
            ("linear_damping_r", self.linear_damping_r),
            ("quadratic_damping_u", self.quadratic_damping_u),
            ("quadratic_damping_v", self.quadratic_damping_v),
            ("quadratic_damping_r", self.quadratic_damping_r),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.mass <= 0.0 {
            return Err(invalid("mass", "must be positive"));
        }
        if self.inertia_z <= 0.0 {
            return Err(invalid("inertia_z", "must be positive"));
        }
        for (name, value) in fields.iter().skip(2) {
            if *value < 0.0 {
                return Err(invalid(name, "damping must be nonnegative"));
            }
        }
        let m = self.inertia();
        for (i, name) in ["added_mass_u", "added_mass_v", "added_mass_r"]
            .iter()
            .enumerate()
        {
            if !(m[i] > 0.0) {
                return Err(invalid(name, "derived inertia must be strictly positive"));
            }
        }
        for i in 0..3 {
            if !(self.tau_min[i] < 0.0 && self.tau_max[i] > 0.0) {
                return Err(invalid(
                    if self.tau_max[i] > 0.0 {
                        "tau_min"
                    } else {
                        "tau_max"
                    },
                    "limits must satisfy tau_min < 0 < tau_max componentwise",
                ));
            }
        }
        Ok(())
    }
}

fn invalid(field: &str, reason: &str) -> GbtError {
    GbtError::InvalidConfig {
        field: format!("vehicle.{field}"),
        reason: reason.to_string(),
    }
}

/// Pose `eta = [x, y, psi]` in the earth frame and body velocities `nu = [u, v, r]`.
///
/// `psi` is never wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuvState {
    pub eta: Vector3<f64>,
    pub nu: Vector3<f64>,
}

impl AuvState {
    pub fn new(eta: Vector3<f64>, nu: Vector3<f64>) -> Self {
        Self { eta, nu }
    }

    pub fn at_rest(x: f64, y: f64, psi: f64) -> Self {
        Self::new(Vector3::new(x, y, psi), Vector3::zeros())
    }

    pub fn position(&self) -> nalgebra::Vector2<f64> {
        nalgebra::Vector2::new(self.eta[0], self.eta[1])
    }

    pub fn is_finite(&self) -> bool {
        self.eta.iter().chain(self.nu.iter()).all(|v| v.is_finite())
    }

    fn to_vector(self) -> Vector6<f64> {
        Vector6::new(
            self.eta[0],
            self.eta[1],
            self.eta[2],
            self.nu[0],
            self.nu[1],
            self.nu[2],
        )
    }

    fn from_vector(x: &Vector6<f64>) -> Self {
        Self::new(
            Vector3::new(x[0], x[1], x[2]),
            Vector3::new(x[3], x[4], x[5]),
        )
    }
}

/// Control forces and moment `[F_u, F_v, F_r]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench(pub Vector3<f64>);

impl Wrench {
    pub fn new(f_u: f64, f_v: f64, f_r: f64) -> Self {
        Self(Vector3::new(f_u, f_v, f_r))
    }

    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }
}

/// Rotation about the vertical axis, body frame to earth frame.
pub fn rotation_matrix(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `C(nu) nu` for the diagonal-inertia model. Always orthogonal to `nu`.
pub fn coriolis_force(nu: &Vector3<f64>, params: &AuvParams) -> Vector3<f64> {
    let m = params.inertia();
    let (u, v, r) = (nu[0], nu[1], nu[2]);
    Vector3::new(-m[1] * v * r, m[0] * u * r, m[1] * v * u - m[0] * u * v)
}

/// Diagonal of the damping matrix `D(nu)`.
pub fn damping_diagonal(nu: &Vector3<f64>, params: &AuvParams) -> Vector3<f64> {
    Vector3::new(
        params.linear_damping_u + params.quadratic_damping_u * nu[0].abs(),
        params.linear_damping_v + params.quadratic_damping_v * nu[1].abs(),
        params.linear_damping_r + params.quadratic_damping_r * nu[2].abs(),
    )
}

/// `[J(eta) nu ; M^-1 (tau - C(nu) nu - D(nu) nu)]`, ordered `[eta_dot, nu_dot]`.
pub fn dynamics_derivative(state: &AuvState, tau: &Wrench, params: &AuvParams) -> Vector6<f64> {
    let eta_dot = rotation_matrix(state.eta[2]) * state.nu;
    let drag = damping_diagonal(&state.nu, params).component_mul(&state.nu);
    let rhs = tau.0 - coriolis_force(&state.nu, params) - drag;
    let nu_dot = rhs.component_div(&params.inertia());
    Vector6::new(
        eta_dot[0], eta_dot[1], eta_dot[2], nu_dot[0], nu_dot[1], nu_dot[2],
    )
}

/// Classical RK4 from `t0` to `t1` with step `dt`; the last step is shortened to land on `t1`.
pub fn integrate<F>(
    x0: &AuvState,
    mut tau_fn: F,
    t0: f64,
    t1: f64,
    dt: f64,
    params: &AuvParams,
) -> Result<AuvState>
where
    F: FnMut(f64) -> Wrench,
{
    assert!(t1 > t0 && dt > 0.0, "integrate requires t1 > t0 and dt > 0");
    let span = t1 - t0;
    // Tolerate round-off so that e.g. 0.1 / 1e-3 is 100 full steps.
    let full = ((span / dt) * (1.0 + 1e-12)).floor() as usize;
    let remainder = span - full as f64 * dt;
    let mut x = x0.to_vector();
    let f = |t: f64, x: &Vector6<f64>, tau_fn: &mut F| {
        let s = AuvState::from_vector(x);
        dynamics_derivative(&s, &tau_fn(t), params)
    };
    let mut step = |t: f64, h: f64, x: &mut Vector6<f64>| -> Result<()> {
        let k1 = f(t, x, &mut tau_fn);
        let k2 = f(t + 0.5 * h, &(*x + k1 * (0.5 * h)), &mut tau_fn);
        let k3 = f(t + 0.5 * h, &(*x + k2 * (0.5 * h)), &mut tau_fn);
        let k4 = f(t + h, &(*x + k3 * h), &mut tau_fn);
        *x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GbtError::IntegrationDiverged { t: t + h })
        }
    };
    for i in 0..full {
        step(t0 + i as f64 * dt, dt, &mut x)?;
    }
    if remainder > 1e-12 * dt.max(span) {
        step(t0 + full as f64 * dt, remainder, &mut x)?;
    }
    Ok(AuvState::from_vector(&x))
}

/// State from flat output: `eta = z`, `nu = J(z_psi)^T z_dot`.
pub fn flat_to_state(z: &Vector3<f64>, z_dot: &Vector3<f64>) -> AuvState {
    AuvState::new(*z, rotation_matrix(z[2]).transpose() * z_dot)
}

/// Inverse dynamics along a flat trajectory.
pub fn flat_to_wrench(
    z: &Vector3<f64>,
    z_dot: &Vector3<f64>,
    z_ddot: &Vector3<f64>,
    params: &AuvParams,
) -> Wrench {
    let psi = z[2];
    let psi_dot = z_dot[2];
    let (s, c) = psi.sin_cos();
    let jt = rotation_matrix(psi).transpose();
    let nu = jt * z_dot;
    // d/dt(J^T) z_dot
    let jt_dot_zdot = Vector3::new(
        psi_dot * (-s * z_dot[0] + c * z_dot[1]),
        psi_dot * (-c * z_dot[0] - s * z_dot[1]),
        0.0,
    );
    let nu_dot = jt * z_ddot + jt_dot_zdot;
    let drag = damping_diagonal(&nu, params).component_mul(&nu);
    Wrench(params.inertia().component_mul(&nu_dot) + coriolis_force(&nu, params) + drag)
}
