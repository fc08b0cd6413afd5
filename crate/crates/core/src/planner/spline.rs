//! Piecewise-quadratic flat-output trajectory.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{GbtError, Result};
use crate::vehicle::{flat_to_state, flat_to_wrench, rotation_matrix, AuvParams, AuvState, Wrench};

/// Coefficients of one piece: `z(s) = c0 + c1 s + c2 s^2` for `s` in `[0, T]`,
/// each a 3-vector over the flat outputs `[x, y, psi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub c0: Vector3<f64>,
    pub c1: Vector3<f64>,
    pub c2: Vector3<f64>,
}

impl Piece {
    pub fn position(&self, s: f64) -> Vector3<f64> {
        self.c0 + self.c1 * s + self.c2 * (s * s)
    }

    pub fn velocity(&self, s: f64) -> Vector3<f64> {
        self.c1 + self.c2 * (2.0 * s)
    }

    pub fn acceleration(&self) -> Vector3<f64> {
        self.c2 * 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatTrajectory {
    pub pieces: Vec<Piece>,
    pub t_start: f64,
    pub segment: f64,
}

impl FlatTrajectory {
    pub fn end_time(&self) -> f64 {
        self.t_start + self.segment * self.pieces.len() as f64
    }

    /// Piece index and local time for absolute `t`; times past the end map into the last piece.
    fn locate(&self, t: f64) -> (usize, f64) {
        let rel = ((t - self.t_start) / self.segment).max(0.0);
        let i = (rel.floor() as usize).min(self.pieces.len() - 1);
        (i, t - self.t_start - i as f64 * self.segment)
    }

    /// `(z, z_dot, z_ddot)` at absolute time `t`.
    pub fn eval(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (i, s) = self.locate(t);
        let p = &self.pieces[i];
        (p.position(s), p.velocity(s), p.acceleration())
    }

    /// Evaluation inside a given piece at local time `s`, which keeps node
    /// evaluations at piece boundaries on the intended side.
    pub fn eval_piece(&self, piece: usize, s: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let p = &self.pieces[piece];
        (p.position(s), p.velocity(s), p.acceleration())
    }

    pub fn state_at(&self, t: f64) -> AuvState {
        let (z, zd, _) = self.eval(t);
        flat_to_state(&z, &zd)
    }

    pub fn wrench_at(&self, t: f64, params: &AuvParams) -> Wrench {
        let (z, zd, zdd) = self.eval(t);
        flat_to_wrench(&z, &zd, &zdd, params)
    }

    pub fn piece_wrench(&self, piece: usize, s: f64, params: &AuvParams) -> Wrench {
        let (z, zd, zdd) = self.eval_piece(piece, s);
        flat_to_wrench(&z, &zd, &zdd, params)
    }

    /// Endpoints `z(t_{k+i})`, `i = 1..p`.
    pub fn endpoints(&self) -> Vec<Vector3<f64>> {
        self.pieces
            .iter()
            .map(|p| p.position(self.segment))
            .collect()
    }
}

/// Spline through the endpoints with the initial pose and velocity pinned to the vehicle state.
///
/// Per flat dimension the constraints are
/// `c_1(0) = eta`, `c_1'(0) = J(eta) nu`, `c_i(T) = zbar_i`,
/// `c_i(T) = c_{i+1}(0)`, `c_i'(T) = c_{i+1}'(0)`. Ordered piece by piece the
/// `3p x 3p` system is lower triangular and is solved by forward substitution.
pub fn solve_coefficients(
    eta0: &Vector3<f64>,
    nu0: &Vector3<f64>,
    endpoints: &[Vector3<f64>],
    segment: f64,
    t_start: f64,
) -> Result<FlatTrajectory> {
    if !(segment > 0.0) || endpoints.is_empty() {
        return Err(GbtError::SplineSolve);
    }
    let mut pos = *eta0;
    let mut vel = rotation_matrix(eta0[2]) * nu0;
    let t2 = segment * segment;
    let mut pieces = Vec::with_capacity(endpoints.len());
    for zbar in endpoints {
        let c2 = (zbar - pos - vel * segment) / t2;
        let piece = Piece {
            c0: pos,
            c1: vel,
            c2,
        };
        pos = *zbar;
        vel = piece.velocity(segment);
        pieces.push(piece);
    }
    if pieces.iter().any(|p| !(p.c2.iter().all(|v| v.is_finite()))) {
        return Err(GbtError::SplineSolve);
    }
    Ok(FlatTrajectory {
        pieces,
        t_start,
        segment,
    })
}

/// Dense assembly of the constraint system for one flat dimension, unknowns
/// ordered `[a_1, b_1, c_1, ..., a_p, b_p, c_p]`. Used to cross-check the
/// forward substitution.
pub fn constraint_system(
    z0: f64,
    zdot0: f64,
    endpoints: &[f64],
    segment: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let p = endpoints.len();
    let n = 3 * p;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut row = 0;
    a[(row, 0)] = 1.0;
    b[row] = z0;
    row += 1;
    a[(row, 1)] = 1.0;
    b[row] = zdot0;
    row += 1;
    for (i, zbar) in endpoints.iter().enumerate() {
        a[(row, 3 * i)] = 1.0;
        a[(row, 3 * i + 1)] = segment;
        a[(row, 3 * i + 2)] = segment * segment;
        b[row] = *zbar;
        row += 1;
    }
    for i in 0..p.saturating_sub(1) {
        a[(row, 3 * i)] = 1.0;
        a[(row, 3 * i + 1)] = segment;
        a[(row, 3 * i + 2)] = segment * segment;
        a[(row, 3 * (i + 1))] = -1.0;
        row += 1;
        a[(row, 3 * i + 1)] = 1.0;
        a[(row, 3 * i + 2)] = 2.0 * segment;
        a[(row, 3 * (i + 1) + 1)] = -1.0;
        row += 1;
    }
    debug_assert_eq!(row, n);
    (a, b)
}
