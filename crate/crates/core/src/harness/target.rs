//! Target trajectories.

use nalgebra::{DMatrix, DVector, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{TargetConfig, TargetKind};
use crate::error::{GbtError, Result};

/// Position of the target as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetModel {
    /// `[-1 + 0.5 t, -1 + 0.5 t]`.
    Case1,
    /// Figure-eight through `[3, 0]` at `t = 0`.
    Case2,
    /// Unicycle at 1 m/s with yaw rate `0.5 sin^2(3t)`, tabulated on a fine grid.
    Case3(Tabulated),
    /// Sample path of a GP prior or user knots, cubic Hermite between knots.
    Knots(Tabulated),
}

/// Positions on a uniform grid, evaluated with cubic Hermite interpolation
/// (Catmull-Rom slopes); times beyond the grid extrapolate linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub times: Vec<f64>,
    pub points: Vec<Vector2<f64>>,
}

impl Tabulated {
    fn slope(&self, i: usize) -> Vector2<f64> {
        let n = self.points.len();
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        (self.points[b] - self.points[a]) / (self.times[b] - self.times[a])
    }

    pub fn eval(&self, t: f64) -> Vector2<f64> {
        let n = self.times.len();
        if n == 1 {
            return self.points[0];
        }
        if t <= self.times[0] {
            return self.points[0] + self.slope(0) * (t - self.times[0]);
        }
        if t >= self.times[n - 1] {
            return self.points[n - 1] + self.slope(n - 1) * (t - self.times[n - 1]);
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.points[i] * h00
            + self.slope(i) * (h * h10)
            + self.points[i + 1] * h01
            + self.slope(i + 1) * (h * h11)
    }
}

/// Fixed-step RK4 of `x' = cos psi, y' = sin psi, psi' = 0.5 sin^2(3t)` out to `t_end`.
pub fn integrate_case3(start: Vector2<f64>, heading: f64, t_end: f64, step: f64) -> Tabulated {
    let f = |t: f64, s: [f64; 3]| [s[2].cos(), s[2].sin(), 0.5 * (3.0 * t).sin().powi(2)];
    let n = (t_end / step).ceil() as usize;
    let mut s = [start[0], start[1], heading];
    let mut times = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    times.push(0.0);
    points.push(start);
    for i in 0..n {
        let t = i as f64 * step;
        let add =
            |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
        let k1 = f(t, s);
        let k2 = f(t + 0.5 * step, add(s, k1, 0.5 * step));
        let k3 = f(t + 0.5 * step, add(s, k2, 0.5 * step));
        let k4 = f(t + step, add(s, k3, step));
        for j in 0..3 {
            s[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        times.push((i + 1) as f64 * step);
        points.push(Vector2::new(s[0], s[1]));
    }
    Tabulated { times, points }
}

/// Draws both coordinates independently from `GP(0, sf2 exp(-(t-t')^2 / 2l^2))` on `times`.
pub fn sample_gp_path<R: Rng + ?Sized>(
    times: &[f64],
    length_scale: f64,
    signal_var: f64,
    rng: &mut R,
) -> Result<Tabulated> {
    let n = times.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let d = times[i] - times[j];
        signal_var * (-0.5 * d * d / (length_scale * length_scale)).exp()
    });
    let mut jitter = 1e-10 * signal_var;
    let chol = loop {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            break c;
        }
        jitter *= 10.0;
        if jitter > 1e-2 * signal_var {
            return Err(GbtError::IllConditionedPrior { jitter });
        }
    };
    let l = chol.l();
    let zx = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let zy = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (x, y) = (&l * zx, &l * zy);
    Ok(Tabulated {
        times: times.to_vec(),
        points: (0..n).map(|i| Vector2::new(x[i], y[i])).collect(),
    })
}

impl TargetModel {
    /// Builds the model for an episode covering `[0, t_end]`. `grid` is the
    /// control period, used as the knot spacing of GP-sampled paths.
    pub fn from_config<R: Rng + ?Sized>(
        cfg: &TargetConfig,
        t_end: f64,
        grid: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match cfg.kind {
            TargetKind::Case1 => TargetModel::Case1,
            TargetKind::Case2 => TargetModel::Case2,
            TargetKind::Case3 => TargetModel::Case3(integrate_case3(
                Vector2::new(-2.0, -2.0),
                cfg.case3_heading,
                t_end,
                cfg.ode_step,
            )),
            TargetKind::GpSample => {
                let n = (t_end / grid).ceil() as usize;
                let times: Vec<f64> = (0..=n).map(|i| i as f64 * grid).collect();
                TargetModel::Knots(sample_gp_path(
                    &times,
                    cfg.gp_length_scale,
                    cfg.gp_signal_var,
                    rng,
                )?)
            }
            TargetKind::Custom => TargetModel::Knots(Tabulated {
                times: cfg.waypoints.iter().map(|w| w[0]).collect(),
                points: cfg
                    .waypoints
                    .iter()
                    .map(|w| Vector2::new(w[1], w[2]))
                    .collect(),
            }),
        })
    }

    pub fn position(&self, t: f64) -> Vector2<f64> {
        match self {
            TargetModel::Case1 => Vector2::new(-1.0 + 0.5 * t, -1.0 + 0.5 * t),
            TargetModel::Case2 => {
                let a = 0.125 * std::f64::consts::PI * t;
                let den = (1.0 + a.sin().powi(2)).powi(2);
                Vector2::new(3.0 * a.cos() / den, 3.0 * a.cos() * a.sin() / den)
            }
            TargetModel::Case3(tab) | TargetModel::Knots(tab) => tab.eval(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(kind: TargetKind) -> TargetModel {
        let cfg = TargetConfig {
            kind,
            ..TargetConfig::default()
        };
        TargetModel::from_config(&cfg, 25.0, 0.1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn case_start_points() {
        assert_eq!(
            model(TargetKind::Case1).position(2.0),
            Vector2::new(0.0, 0.0)
        );
        assert_relative_eq!(
            model(TargetKind::Case2).position(0.0),
            Vector2::new(3.0, 0.0),
            epsilon = 1e-15
        );
        assert_eq!(
            model(TargetKind::Case3).position(0.0),
            Vector2::new(-2.0, -2.0)
        );
    }

    #[test]
    fn case3_unit_speed_and_closed_form_heading() {
        let m = model(TargetKind::Case3);
        // psi(t) = 0.25 t - sin(6t) / 24
        let psi = |t: f64| 0.25 * t - (6.0 * t).sin() / 24.0;
        for t in [0.5, 3.0, 7.25, 19.0] {
            let h = 1e-3;
            let v = (m.position(t + h) - m.position(t - h)) / (2.0 * h);
            assert!((v.norm() - 1.0).abs() < 1e-6, "{t}");
            assert!(
                crate::planner::wrap_angle(v[1].atan2(v[0]) - psi(t)).abs() < 1e-5,
                "{t}"
            );
        }
    }

    #[test]
    fn case2_is_periodic() {
        let m = model(TargetKind::Case2);
        assert_relative_eq!(m.position(3.0), m.position(19.0), epsilon = 1e-12);
    }

    #[test]
    fn hermite_reproduces_knots_and_lines() {
        let tab = Tabulated {
            times: vec![0.0, 1.0, 2.0, 3.0],
            points: (0..4)
                .map(|i| Vector2::new(i as f64, 2.0 - 0.5 * i as f64))
                .collect(),
        };
        for t in [0.0, 0.3, 1.0, 2.7, 3.0, 4.0] {
            assert_relative_eq!(tab.eval(t), Vector2::new(t, 2.0 - 0.5 * t), epsilon = 1e-12);
        }
    }

    #[test]
    fn gp_paths_are_seeded_and_prior_scaled() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let a = sample_gp_path(&times, 2.0, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = sample_gp_path(&times, 2.0, 1.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sq = 0.0;
        let reps = 400;
        for _ in 0..reps {
            let p = sample_gp_path(&times[..3], 2.0, 1.0, &mut rng).unwrap();
            sq += p.points[0].norm_squared();
        }
        let var = sq / (2 * reps) as f64;
        assert!((var - 1.0).abs() < 0.15, "{var}");
    }
}
