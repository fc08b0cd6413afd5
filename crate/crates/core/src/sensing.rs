//! Bearing measurements, their pseudo-linear form and the sliding data window.

use std::collections::VecDeque;
use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GbtError, Result};
use crate::linalg::sym2_condition;

/// One stored measurement: time, unit bearing from observer to target, observer position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingSample {
    pub t: f64,
    pub bearing: Vector2<f64>,
    pub p_auv: Vector2<f64>,
}

/// Noisy unit bearing from `p_auv` towards `p_target`.
///
/// The noise is an isotropic Gaussian position perturbation applied before
/// normalization. Exactly two standard normals are drawn from `rng`.
pub fn measure_bearing<R: Rng + ?Sized>(
    p_target: &Vector2<f64>,
    p_auv: &Vector2<f64>,
    sigma_eps: f64,
    rng: &mut R,
) -> Result<Vector2<f64>> {
    let e0: f64 = rng.sample(StandardNormal);
    let e1: f64 = rng.sample(StandardNormal);
    let q = p_target - p_auv + Vector2::new(e0, e1) * sigma_eps;
    let distance = q.norm();
    if !(distance >= 1e-9) {
        return Err(GbtError::CoincidentPosition { distance });
    }
    Ok(q / distance)
}

/// `[[0, sqrt2], [-sqrt2, 0]] * lambda`.
pub fn orth_complement(bearing: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(SQRT_2 * bearing[1], -SQRT_2 * bearing[0])
}

/// Bounded FIFO window of the most recent bearing samples.
#[derive(Debug, Clone)]
pub struct SlidingDataset {
    capacity: usize,
    samples: VecDeque<BearingSample>,
}

impl SlidingDataset {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            capacity,
            samples: VecDeque::with_capacity(capacity),
        }
    }

    /// Builds a window holding the last `capacity` of `samples`.
    pub fn from_samples(capacity: usize, samples: impl IntoIterator<Item = BearingSample>) -> Self {
        let mut d = Self::new(capacity);
        for s in samples {
            d.push(s);
        }
        d
    }

    /// Appends a sample and evicts the oldest one once the window is full.
    ///
    /// Panics if `sample.t` does not strictly follow the newest stored time.
    pub fn push(&mut self, sample: BearingSample) {
        if let Some(last) = self.samples.back() {
            assert!(
                sample.t > last.t,
                "sample times must be strictly increasing"
            );
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &BearingSample> + Clone {
        self.samples.iter()
    }

    pub fn get(&self, i: usize) -> Option<&BearingSample> {
        self.samples.get(i)
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn bearings(&self) -> Vec<Vector2<f64>> {
        self.samples.iter().map(|s| s.bearing).collect()
    }

    pub fn oldest(&self) -> Option<&BearingSample> {
        self.samples.front()
    }

    pub fn newest(&self) -> Option<&BearingSample> {
        self.samples.back()
    }
}

/// Stacked pseudo-linear equations `y = G P_T + G eps` over a window.
///
/// `G` is block diagonal with row blocks `lambda_bar_i^T`; it is stored by its
/// rows and only materialized on request.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLinearBatch {
    pub rows: Vec<Vector2<f64>>,
    pub y: DVector<f64>,
    pub times: Vec<f64>,
}

impl PseudoLinearBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Dense `N x 2N` block-diagonal `G`.
    pub fn g_matrix(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        let mut g = DMatrix::zeros(n, 2 * n);
        for (i, row) in self.rows.iter().enumerate() {
            g[(i, 2 * i)] = row[0];
            g[(i, 2 * i + 1)] = row[1];
        }
        g
    }
}

pub fn assemble_pseudo_linear(data: &SlidingDataset) -> Result<PseudoLinearBatch> {
    if data.is_empty() {
        return Err(GbtError::EmptyBatch);
    }
    let rows: Vec<_> = data
        .samples()
        .map(|s| orth_complement(&s.bearing))
        .collect();
    let y = DVector::from_iterator(
        rows.len(),
        data.samples().zip(&rows).map(|(s, r)| r.dot(&s.p_auv)),
    );
    Ok(PseudoLinearBatch {
        rows,
        y,
        times: data.times(),
    })
}

/// `sum_i (2 I - 2 lambda_i lambda_i^T)`.
pub fn cumulative_bearing_matrix<'a>(
    bearings: impl IntoIterator<Item = &'a Vector2<f64>>,
) -> Matrix2<f64> {
    bearings.into_iter().fold(Matrix2::zeros(), |acc, l| {
        acc + Matrix2::identity() * 2.0 - l * l.transpose() * 2.0
    })
}

/// Condition number of a cumulative bearing matrix (`INFINITY` when singular).
pub fn bearing_condition(p: &Matrix2<f64>) -> f64 {
    sym2_condition(p)
}

/// log10 of the condition number; `+INFINITY` for singular matrices.
pub fn ccbm(p: &Matrix2<f64>) -> f64 {
    bearing_condition(p).log10()
}
