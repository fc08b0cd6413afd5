//! Smoothed input-limit violation integrated along the planned trajectory.

use nalgebra::Vector3;

use super::spline::FlatTrajectory;
use super::PlannerConfig;
use crate::vehicle::AuvParams;

/// Smoothed hinge: zero below `-varpi`, quadratic blend `(x + varpi)^2 / (4 varpi)`
/// on `[-varpi, varpi]`, identity above. C1, convex and nondecreasing.
pub fn penalty_g(x: f64, varpi: f64) -> f64 {
    debug_assert!(varpi > 0.0);
    if x <= -varpi {
        0.0
    } else if x <= varpi {
        (x + varpi).powi(2) / (4.0 * varpi)
    } else {
        x
    }
}

/// Trapezoid-rule violation of the `gamma`-scaled limits, summed over pieces and channels.
pub fn constraint_violation(traj: &FlatTrajectory, params: &AuvParams, cfg: &PlannerConfig) -> f64 {
    let upper = params.tau_max() * cfg.gamma;
    let lower = params.tau_min() * cfg.gamma;
    let nc = cfg.quadrature_nodes;
    let h = traj.segment / nc as f64;
    let mut total = 0.0;
    for piece in 0..traj.pieces.len() {
        for j in 0..=nc {
            let weight = if j == 0 || j == nc { 0.5 } else { 1.0 };
            let tau = traj.piece_wrench(piece, j as f64 * h, params).0;
            let mut node = 0.0;
            for rho in 0..3 {
                node += penalty_g(tau[rho] - upper[rho], cfg.varpi)
                    + penalty_g(lower[rho] - tau[rho], cfg.varpi);
            }
            total += weight * node;
        }
    }
    total * h
}

/// Largest absolute wrench per channel over all quadrature nodes of the given pieces.
pub fn max_abs_wrench(
    traj: &FlatTrajectory,
    pieces: std::ops::Range<usize>,
    nodes: usize,
    params: &AuvParams,
) -> Vector3<f64> {
    let h = traj.segment / nodes as f64;
    let mut out = Vector3::zeros();
    for piece in pieces {
        for j in 0..=nodes {
            let tau = traj.piece_wrench(piece, j as f64 * h, params).0;
            out = out.zip_map(&tau, |a: f64, b: f64| a.max(b.abs()));
        }
    }
    out
}
