//! Monte-Carlo frequency of the error-bound event on targets drawn from the prior.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::config::{TargetConfig, TargetKind};
use crate::error::Result;
use crate::gp::{build_posterior, error_bound, KernelParams};
use crate::sensing::{measure_bearing, BearingSample, SlidingDataset};

use super::{parallel_map, seeded_stream, TargetModel, STREAM_SENSOR, STREAM_TARGET};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub episodes: usize,
    /// Kernel of both the target prior and the tracker.
    pub length_scale: f64,
    pub signal_var: f64,
    pub delta: f64,
    pub sigma_eps: f64,
    pub period: f64,
    pub capacity: usize,
    pub horizon: usize,
    /// AUV circle around the origin.
    pub orbit_radius: f64,
    pub orbit_rate: f64,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            length_scale: 2.0,
            signal_var: 1.0,
            delta: 0.05,
            sigma_eps: 0.001,
            period: 0.1,
            capacity: 20,
            horizon: 11,
            orbit_radius: 5.0,
            orbit_rate: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub episodes: usize,
    pub violations: usize,
    pub failures: usize,
}

impl CoverageReport {
    /// Violation frequency over the episodes that ran; failed episodes count as violations.
    pub fn violation_frequency(&self) -> f64 {
        (self.violations + self.failures) as f64 / self.episodes.max(1) as f64
    }
}

fn orbit(cfg: &CoverageConfig, t: f64) -> Vector2<f64> {
    let a = cfg.orbit_rate * t;
    Vector2::new(a.cos(), a.sin()) * cfg.orbit_radius
}

/// Fills the window along the circle, then checks whether every query time
/// of the next horizon lies inside the bound. `true` means the bound held.
pub fn coverage_episode(cfg: &CoverageConfig, seed: u64) -> Result<bool> {
    let steps = cfg.capacity;
    let t_end = (steps + cfg.horizon) as f64 * cfg.period;
    let target_cfg = TargetConfig {
        kind: TargetKind::GpSample,
        gp_length_scale: cfg.length_scale,
        gp_signal_var: cfg.signal_var,
        ..TargetConfig::default()
    };
    let target = TargetModel::from_config(
        &target_cfg,
        t_end,
        cfg.period,
        &mut seeded_stream(seed, STREAM_TARGET),
    )?;
    let mut rng = seeded_stream(seed, STREAM_SENSOR);
    let mut data = SlidingDataset::new(cfg.capacity);
    for k in 0..steps {
        let t = k as f64 * cfg.period;
        let p_auv = orbit(cfg, t);
        let bearing = measure_bearing(&target.position(t), &p_auv, cfg.sigma_eps, &mut rng)?;
        data.push(BearingSample { t, bearing, p_auv });
    }
    let kp = KernelParams::new(cfg.length_scale, cfg.signal_var, cfg.sigma_eps);
    let gp = build_posterior(&data, &kp)?;
    let t_now = (steps - 1) as f64 * cfg.period;
    let times: Vec<f64> = (0..=cfg.horizon)
        .map(|i| t_now + i as f64 * cfg.period)
        .collect();
    let bounds = error_bound(&gp, &times, cfg.delta, &data);
    Ok(bounds
        .iter()
        .all(|b| (gp.predict(b.t).0 - target.position(b.t)).norm() <= b.radius()))
}

/// Runs `cfg.episodes` episodes with seeds `cfg.seed + i`.
pub fn coverage_run(cfg: &CoverageConfig) -> CoverageReport {
    let seeds: Vec<u64> = (0..cfg.episodes as u64).map(|i| cfg.seed + i).collect();
    let results = parallel_map(&seeds, |&s| coverage_episode(cfg, s));
    let mut report = CoverageReport {
        episodes: cfg.episodes,
        violations: 0,
        failures: 0,
    };
    for r in results {
        match r {
            Ok(true) => {}
            Ok(false) => report.violations += 1,
            Err(e) => {
                log::warn!("coverage episode failed: {e}");
                report.failures += 1;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episodes_are_deterministic() {
        let cfg = CoverageConfig::default();
        for s in 0..5 {
            assert_eq!(
                coverage_episode(&cfg, s).unwrap(),
                coverage_episode(&cfg, s).unwrap()
            );
        }
    }

    #[test]
    fn small_run_mostly_covers() {
        let cfg = CoverageConfig {
            episodes: 40,
            ..CoverageConfig::default()
        };
        let r = coverage_run(&cfg);
        assert_eq!(r.failures, 0);
        assert!(r.violation_frequency() <= 0.2, "{r:?}");
    }
}
