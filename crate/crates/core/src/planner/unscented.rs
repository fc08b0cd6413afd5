//! Sigma-point approximation of the expected bearing alignment.

use nalgebra::{Matrix2, Vector2};

use crate::error::{GbtError, Result};
use crate::linalg::sym2_sqrt;

/// State dimension of the target position.
const L: f64 = 2.0;

/// Five sigma points `[mu, mu - s1, mu - s2, mu + s1, mu + s2]` and their weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSet {
    pub points: [Vector2<f64>; 5],
    pub weights: [f64; 5],
}

impl SigmaSet {
    pub fn mean(&self) -> Vector2<f64> {
        self.points
            .iter()
            .zip(self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }

    pub fn covariance(&self) -> Matrix2<f64> {
        let mu = self.mean();
        self.points
            .iter()
            .zip(self.weights)
            .map(|(p, w)| (p - mu) * (p - mu).transpose() * w)
            .sum()
    }
}

/// `s_j` is column `j` of the symmetric square root of `(L + kappa) sigma_tilde`.
pub fn sigma_points(mu: &Vector2<f64>, sigma_tilde: &Matrix2<f64>, kappa: f64) -> Result<SigmaSet> {
    assert!(kappa > -L, "kappa must exceed -L");
    let scaled = sigma_tilde * (L + kappa);
    let root = sym2_sqrt(&scaled, 1e-12 * scaled.norm())
        .map_err(|min_eig| GbtError::MatrixRoot { min_eig })?;
    let (c1, c2) = (root.column(0).into_owned(), root.column(1).into_owned());
    let w = 1.0 / (2.0 * (L + kappa));
    Ok(SigmaSet {
        points: [*mu, mu - c1, mu - c2, mu + c1, mu + c2],
        weights: [kappa / (L + kappa), w, w, w, w],
    })
}

/// Expected alignment of one horizon step: `sum_j w_j <desired, unit(chi_j - p_auv)>`.
pub fn alignment_term(
    p_auv: &Vector2<f64>,
    desired: &Vector2<f64>,
    sigma: &SigmaSet,
) -> Result<f64> {
    let mut acc = 0.0;
    for (chi, w) in sigma.points.iter().zip(sigma.weights) {
        let d = chi - p_auv;
        let distance = d.norm();
        if distance < 1e-6 {
            return Err(GbtError::NearSingularBearing { distance });
        }
        acc += w * desired.dot(&d) / distance;
    }
    Ok(acc)
}

/// Sum of [`alignment_term`] over the planning horizon.
pub fn similarity_cost(
    endpoints: &[Vector2<f64>],
    schedule: &[Vector2<f64>],
    sigma_sets: &[SigmaSet],
) -> Result<f64> {
    assert_eq!(endpoints.len(), schedule.len());
    assert_eq!(endpoints.len(), sigma_sets.len());
    endpoints
        .iter()
        .zip(schedule)
        .zip(sigma_sets)
        .map(|((p, d), s)| alignment_term(p, d, s))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn unit_covariance_points() {
        let s = sigma_points(&Vector2::zeros(), &Matrix2::identity(), 1.0).unwrap();
        let r3 = 3f64.sqrt();
        let expected = [[0.0, 0.0], [-r3, 0.0], [0.0, -r3], [r3, 0.0], [0.0, r3]];
        for (p, e) in s.points.iter().zip(expected) {
            assert_relative_eq!(*p, Vector2::from(e), epsilon = 1e-14);
        }
        assert_eq!(
            s.weights,
            [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]
        );
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() <= f64::EPSILON);
        assert_eq!(s.weights[0] * 3.0, 1.0);
        assert_eq!(s.weights[1] * 6.0, 1.0);
    }

    #[test]
    fn collapsed_covariance() {
        let mu = Vector2::new(1.0, -2.0);
        let s = sigma_points(&mu, &Matrix2::zeros(), 1.0).unwrap();
        assert!(s.points.iter().all(|p| *p == mu));
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let err = sigma_points(&Vector2::zeros(), &Matrix2::new(1.0, 0.0, 0.0, -0.5), 1.0);
        assert!(matches!(err, Err(GbtError::MatrixRoot { .. })));
    }

    #[test]
    fn alignment_extremes() {
        let mu = Vector2::new(0.4, 0.9);
        let s = sigma_points(&mu, &Matrix2::zeros(), 1.0).unwrap();
        let d = Vector2::new(0.6, -0.8);
        let behind = mu - d * 2.5;
        let ahead = mu + d * 2.5;
        assert_relative_eq!(
            alignment_term(&behind, &d, &s).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            alignment_term(&ahead, &d, &s).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        let total = similarity_cost(&[behind; 5], &[d; 5], &[s; 5]).unwrap();
        assert_relative_eq!(total, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_sigma_point_errors() {
        let s = sigma_points(&Vector2::zeros(), &Matrix2::zeros(), 1.0).unwrap();
        let err = alignment_term(&Vector2::new(1e-8, 0.0), &Vector2::new(1.0, 0.0), &s);
        assert!(matches!(err, Err(GbtError::NearSingularBearing { .. })));
    }

    proptest! {
        #[test]
        fn moments_match(mx in -5.0f64..5.0, my in -5.0f64..5.0, a in 0.0f64..4.0, d in 0.0f64..4.0, rho in -0.99f64..0.99, kappa in 0.1f64..3.0) {
            let b = rho * (a * d).sqrt();
            let cov = Matrix2::new(a, b, b, d);
            let mu = Vector2::new(mx, my);
            let s = sigma_points(&mu, &cov, kappa).unwrap();
            prop_assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((s.mean() - mu).norm() < 1e-10);
            prop_assert!((s.covariance() - cov).norm() < 1e-8);
        }

        #[test]
        fn cost_is_bounded(px in -5.0f64..5.0, py in -5.0f64..5.0, th in -4.0f64..4.0, a in 0.01f64..2.0) {
            let s = sigma_points(&Vector2::zeros(), &(Matrix2::identity() * a), 1.0).unwrap();
            let v = alignment_term(&Vector2::new(px, py), &Vector2::new(th.cos(), th.sin()), &s);
            if let Ok(v) = v {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
