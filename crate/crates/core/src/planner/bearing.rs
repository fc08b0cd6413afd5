//! Desired bearing schedule and the uniform optimal bearing set.

use std::f64::consts::TAU;

use nalgebra::Vector2;

use crate::error::{GbtError, Result};

/// `[cos(omega t), sin(omega t)]`, using absolute time.
pub fn desired_bearing(t: f64, omega: f64) -> Vector2<f64> {
    let (s, c) = (omega * t).sin_cos();
    Vector2::new(c, s)
}

/// `m` bearings evenly spaced on the circle; their cumulative bearing matrix is `m I`.
pub fn optimal_bearing_set(m: usize) -> Result<Vec<Vector2<f64>>> {
    if m < 3 {
        return Err(GbtError::DegenerateBearingSet(m));
    }
    Ok((0..m)
        .map(|i| desired_bearing(i as f64, TAU / m as f64))
        .collect())
}
