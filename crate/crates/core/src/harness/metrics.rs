//! Run summaries derived from the step logs.

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::records::StepRecord;

use super::Episode;

/// Convergence threshold on the horizon-averaged error (m).
pub const CONVERGENCE_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub t0: f64,
    pub t1: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub name: String,
    pub windows: Vec<WindowStats>,
    pub last_half_mean: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config_hash: String,
    pub mode: String,
    pub steps: usize,
    pub failure: Option<String>,
    pub windows: Vec<WindowStats>,
    /// Mean `avg_err` over the second half of the logged steps.
    pub last_half_mean: f64,
    /// First time after which `avg_err` stays at or below 0.3 m.
    pub convergence_time: Option<f64>,
    /// Fraction of steps where the error bound held at every horizon time.
    pub coverage_fraction: f64,
    /// Pearson correlation of `avg_err` with finite `ccbm` values.
    pub error_ccbm_correlation: Option<f64>,
    /// Largest `|tau| / tau_max` over channels and steps (limits after ability scaling).
    pub max_limit_ratio: f64,
    pub max_open_loop_gap: f64,
    pub baselines: Vec<BaselineSummary>,
}

fn window_stats(records: &[StepRecord], t0: f64, t1: f64) -> WindowStats {
    let eps = 1e-9;
    let errs: Vec<f64> = records
        .iter()
        .filter(|r| r.t >= t0 - eps && r.t <= t1 + eps)
        .map(|r| r.avg_err)
        .collect();
    let (mean, max) = if errs.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            errs.iter().sum::<f64>() / errs.len() as f64,
            errs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    WindowStats { t0, t1, mean, max }
}

fn last_half_mean(records: &[StepRecord]) -> f64 {
    let tail = &records[records.len() / 2..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().map(|r| r.avg_err).sum::<f64>() / tail.len() as f64
}

/// Sample Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn metrics(cfg: &ScenarioConfig, ep: &Episode) -> RunSummary {
    let recs = &ep.records;
    let windows = cfg
        .output
        .error_windows
        .iter()
        .map(|w| window_stats(recs, w[0], w[1]))
        .collect();
    let convergence_time = match recs.iter().rposition(|r| r.avg_err > CONVERGENCE_RADIUS) {
        None => recs.first().map(|r| r.t),
        Some(i) => recs.get(i + 1).map(|r| r.t),
    };
    let coverage_fraction = if ep.bound_events.is_empty() {
        f64::NAN
    } else {
        ep.bound_events.iter().filter(|&&e| e).count() as f64 / ep.bound_events.len() as f64
    };
    let (errs, ccbms): (Vec<f64>, Vec<f64>) = recs
        .iter()
        .filter(|r| r.ccbm.is_finite())
        .map(|r| (r.avg_err, r.ccbm))
        .unzip();
    let limits = cfg.vehicle.with_limit_scale(cfg.ability_scale).tau_max();
    let max_limit_ratio = recs
        .iter()
        .map(|r| {
            (r.tau_u_max_abs / limits[0])
                .max(r.tau_v_max_abs / limits[1])
                .max(r.tau_r_max_abs / limits[2])
        })
        .fold(0.0, f64::max);
    RunSummary {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        mode: cfg.mode.name().to_string(),
        steps: recs.len(),
        failure: ep.failure.as_ref().map(|e| e.to_string()),
        windows,
        last_half_mean: last_half_mean(recs),
        convergence_time,
        coverage_fraction,
        error_ccbm_correlation: pearson(&errs, &ccbms),
        max_limit_ratio,
        max_open_loop_gap: ep.open_loop_gaps.iter().cloned().fold(0.0, f64::max),
        baselines: ep
            .baselines
            .iter()
            .map(|b| BaselineSummary {
                name: b.kind.name().to_string(),
                windows: cfg
                    .output
                    .error_windows
                    .iter()
                    .map(|w| window_stats(&b.records, w[0], w[1]))
                    .collect(),
                last_half_mean: last_half_mean(&b.records),
            })
            .collect(),
    }
}
