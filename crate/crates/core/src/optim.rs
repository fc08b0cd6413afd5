//! Small dense quasi-Newton minimizer with finite-difference gradients.
//!
//! BFGS on the inverse Hessian, Armijo backtracking, optional box bounds
//! handled by projection. Dimensions here are tiny (2 for kernel tuning,
//! 3p for trajectory endpoints), so everything is dense `Vec<f64>`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop when the infinity norm of the projected gradient drops below this.
    pub grad_tol: f64,
    /// Central-difference step per coordinate.
    pub fd_steps: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Largest coordinate change tried by the first line-search step.
    pub max_step: Option<f64>,
    /// Rescale the identity guess after the first accepted step.
    pub initial_scaling: bool,
}

impl BfgsOptions {
    pub fn new(dim: usize, max_iters: usize, grad_tol: f64, fd_step: f64) -> Self {
        Self {
            max_iters,
            grad_tol,
            fd_steps: vec![fd_step; dim],
            lower: None,
            upper: None,
            max_step: None,
            initial_scaling: false,
        }
    }

    pub fn with_max_step(mut self, cap: f64) -> Self {
        self.max_step = Some(cap);
        self
    }

    pub fn with_initial_scaling(mut self) -> Self {
        self.initial_scaling = true;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
}

struct Counted<'a, F> {
    f: &'a F,
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn project(x: &mut [f64], opts: &BfgsOptions) {
    if let (Some(lo), Some(hi)) = (&opts.lower, &opts.upper) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    }
}

fn gradient<F: Fn(&[f64]) -> f64>(
    f: &mut Counted<'_, F>,
    x: &[f64],
    opts: &BfgsOptions,
) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = opts.fd_steps[i];
        let (mut hi_x, mut lo_x) = (x[i] + h, x[i] - h);
        if let (Some(lo), Some(hi)) = (&opts.lower, &opts.upper) {
            hi_x = hi_x.min(hi[i]);
            lo_x = lo_x.max(lo[i]);
        }
        probe[i] = hi_x;
        let fp = f.eval(&probe);
        probe[i] = lo_x;
        let fm = f.eval(&probe);
        probe[i] = x[i];
        g[i] = if hi_x > lo_x {
            (fp - fm) / (hi_x - lo_x)
        } else {
            0.0
        };
        if !g[i].is_finite() {
            g[i] = 0.0;
        }
    }
    g
}

/// Zeroes gradient components that push against an active bound.
fn projected_gradient(x: &[f64], g: &[f64], opts: &BfgsOptions) -> Vec<f64> {
    let mut pg = g.to_vec();
    if let (Some(lo), Some(hi)) = (&opts.lower, &opts.upper) {
        for i in 0..x.len() {
            if (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) {
                pg[i] = 0.0;
            }
        }
    }
    pg
}

/// Minimizes `f` from `x0`. The returned point never has a larger value than `x0`
/// (after projection onto the bounds).
pub fn minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome {
    let n = x0.len();
    assert_eq!(opts.fd_steps.len(), n);
    let mut fc = Counted { f, evaluations: 0 };
    let mut x = x0.to_vec();
    project(&mut x, opts);
    let mut fx = fc.eval(&x);
    let initial_value = fx;
    if !fx.is_finite() {
        return BfgsOutcome {
            x,
            value: fx,
            initial_value,
            iterations: 0,
            converged: false,
            evaluations: fc.evaluations,
        };
    }
    let mut g = gradient(&mut fc, &x, opts);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    let mut iterations = 0;
    let mut fresh = true;

    while iterations < opts.max_iters {
        let pg = projected_gradient(&x, &g, opts);
        if pg.iter().all(|v| v.abs() < opts.grad_tol) {
            converged = true;
            break;
        }
        iterations += 1;
        let gv = DVector::from_column_slice(&pg);
        let mut dir = -(&h_inv * &gv);
        let mut slope = dir.dot(&gv);
        if !(slope < 0.0) {
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            dir = -gv.clone();
            slope = dir.dot(&gv);
        }
        // Armijo backtracking.
        let mut step = match opts.max_step {
            Some(cap) if dir.amax() > cap => cap / dir.amax(),
            _ => 1.0,
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x
                .iter()
                .zip(dir.iter())
                .map(|(a, d)| a + step * d)
                .collect();
            project(&mut trial, opts);
            let ft = fc.eval(&trial);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if !fresh {
                h_inv = DMatrix::identity(n, n);
                fresh = true;
                continue;
            }
            break;
        };
        let g_new = gradient(&mut fc, &x_new, opts);
        let s = DVector::from_iterator(n, x_new.iter().zip(&x).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(n, g_new.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if fresh && opts.initial_scaling {
                // Shanno-Phua scaling of the first inverse-Hessian guess.
                h_inv = DMatrix::identity(n, n) * (sy / yv.dot(&yv));
            }
            fresh = false;
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - &s * yv.transpose() * rho;
            let right = &eye - &yv * s.transpose() * rho;
            h_inv = left * &h_inv * right + &s * s.transpose() * rho;
        }
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if improvement.abs() <= 1e-15 * (1.0 + fx.abs()) && s.amax() < 1e-14 {
            break;
        }
    }
    BfgsOutcome {
        x,
        value: fx,
        initial_value,
        iterations,
        converged,
        evaluations: fc.evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(&f, &[-1.2, 1.0], &BfgsOptions::new(2, 200, 1e-8, 1e-6));
        assert!(
            (out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4,
            "{out:?}"
        );
        assert!(out.value <= out.initial_value);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let opts =
            BfgsOptions::new(2, 50, 1e-8, 1e-6).with_bounds(vec![-1.0, -0.5], vec![2.0, 2.0]);
        let out = minimize(&f, &[0.0, 0.0], &opts);
        assert!(
            (out.x[0] - 2.0).abs() < 1e-9 && (out.x[1] + 0.5).abs() < 1e-9,
            "{out:?}"
        );
        assert!(out.converged);
    }

    #[test]
    fn non_finite_start_returns_start() {
        let f = |_: &[f64]| f64::NAN;
        let out = minimize(&f, &[1.0], &BfgsOptions::new(1, 10, 1e-6, 1e-6));
        assert_eq!(out.x, vec![1.0]);
        assert_eq!(out.iterations, 0);
    }
}
