//! Closed-form helpers for symmetric 2x2 matrices.

use nalgebra::{Matrix2, Vector2};

/// Eigen-decomposition of a symmetric 2x2 matrix.
///
/// Returns eigenvalues in ascending order and the matching unit eigenvectors
/// as the columns of the second element.
pub fn sym2_eigen(m: &Matrix2<f64>) -> (Vector2<f64>, Matrix2<f64>) {
    let a = m[(0, 0)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let d = m[(1, 1)];
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let radius = half_diff.hypot(b);
    let lo = mean - radius;
    let hi = mean + radius;
    // Eigenvector angle of the larger eigenvalue.
    let theta = 0.5 * (2.0 * b).atan2(a - d);
    let (s, c) = theta.sin_cos();
    let v_hi = Vector2::new(c, s);
    let v_lo = Vector2::new(-s, c);
    (Vector2::new(lo, hi), Matrix2::from_columns(&[v_lo, v_hi]))
}

/// Ratio of largest to smallest eigenvalue magnitude of a symmetric PSD matrix,
/// `f64::INFINITY` when the smaller one is below `1e-12` of the larger.
pub fn sym2_condition(m: &Matrix2<f64>) -> f64 {
    let (vals, _) = sym2_eigen(m);
    let lo = vals[0].abs().min(vals[1].abs());
    let hi = vals[0].abs().max(vals[1].abs());
    if hi == 0.0 || lo < 1e-12 * hi {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Symmetric square root of a PSD matrix. Eigenvalues down to `-tol` are
/// clamped to zero; anything more negative returns `None` with the offending value.
pub fn sym2_sqrt(m: &Matrix2<f64>, tol: f64) -> Result<Matrix2<f64>, f64> {
    let (vals, vecs) = sym2_eigen(m);
    if vals[0] < -tol {
        return Err(vals[0]);
    }
    let roots = Matrix2::from_diagonal(&vals.map(|v| v.max(0.0).sqrt()));
    Ok(vecs * roots * vecs.transpose())
}

/// Spectral norm of a symmetric matrix.
pub fn sym2_norm(m: &Matrix2<f64>) -> f64 {
    let (vals, _) = sym2_eigen(m);
    vals[0].abs().max(vals[1].abs())
}
