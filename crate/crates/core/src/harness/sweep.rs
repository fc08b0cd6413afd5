//! Variant matrices over shared seeds.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::baselines::MotionMode;
use crate::config::{BaselineKind, ScenarioConfig};

use super::{run_episode, Episode, RunSummary};

/// Limit scales of the ability sweep, before the direct-placement variant.
pub const ABILITY_SCALES: [f64; 4] = [0.1, 0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    MotionModes,
    Ability,
    Baselines,
}

/// One (variant, seed) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub variant: String,
    pub seed: u64,
    /// Mean error over the first configured window (NaN on failure).
    pub steady_error: f64,
    pub last_half_error: f64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

pub fn mode_variants(base: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
    [
        MotionMode::Gbt,
        MotionMode::Static,
        MotionMode::Random,
        MotionMode::DirectPlacement,
    ]
    .into_iter()
    .map(|m| {
        let mut c = base.clone();
        c.mode = m;
        c.baselines.clear();
        (m.name().to_string(), c)
    })
    .collect()
}

pub fn ability_variants(base: &ScenarioConfig, scales: &[f64]) -> Vec<(String, ScenarioConfig)> {
    let mut out: Vec<_> = scales
        .iter()
        .map(|&s| {
            let mut c = base.clone();
            c.mode = MotionMode::Gbt;
            c.ability_scale = s;
            c.baselines.clear();
            (format!("scale_{s}"), c)
        })
        .collect();
    let mut direct = base.clone();
    direct.mode = MotionMode::DirectPlacement;
    direct.baselines.clear();
    out.push(("direct".to_string(), direct));
    out
}

/// Worker count: `GBT_THREADS` when set, else available parallelism.
pub fn thread_count() -> usize {
    std::env::var("GBT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Maps `f` over `items` on [`thread_count`] workers, keeping input order.
pub fn parallel_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let threads = thread_count().min(items.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<U>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every item ran"))
        .collect()
}

/// Runs each config and returns the episodes in input order.
pub fn run_cells(configs: &[ScenarioConfig]) -> Vec<crate::Result<Episode>> {
    parallel_map(configs, run_episode)
}

fn cell(variant: &str, seed: u64, ep: &crate::Result<Episode>) -> SweepCell {
    match ep {
        Ok(ep) => SweepCell {
            variant: variant.to_string(),
            seed,
            steady_error: ep.summary.windows.first().map_or(f64::NAN, |w| w.mean),
            last_half_error: ep.summary.last_half_mean,
            error: ep.summary.failure.clone(),
            summary: Some(ep.summary.clone()),
        },
        Err(e) => SweepCell {
            variant: variant.to_string(),
            seed,
            steady_error: f64::NAN,
            last_half_error: f64::NAN,
            summary: None,
            error: Some(e.to_string()),
        },
    }
}

/// One finished (variant, seed) episode.
#[derive(Debug)]
pub struct SweepRun {
    pub variant: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub episode: crate::Result<Episode>,
}

/// Variant configs of `kind`. The baselines kind is a single GBT variant
/// carrying both estimators.
pub fn variants(kind: SweepKind, base: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
    match kind {
        SweepKind::MotionModes => mode_variants(base),
        SweepKind::Ability => ability_variants(base, &ABILITY_SCALES),
        SweepKind::Baselines => {
            let mut c = base.clone();
            c.mode = MotionMode::Gbt;
            c.baselines = vec![BaselineKind::Plkf, BaselineKind::Pr];
            vec![("gbt".to_string(), c)]
        }
    }
}

/// Runs every variant of `kind` on every seed.
pub fn sweep_runs(kind: SweepKind, base: &ScenarioConfig, seeds: &[u64]) -> Vec<SweepRun> {
    let mut configs = Vec::new();
    let mut labels = Vec::new();
    for (label, cfg) in variants(kind, base) {
        for &s in seeds {
            let mut c = cfg.clone();
            c.seed = s;
            configs.push(c);
            labels.push((label.clone(), s));
        }
    }
    let episodes = run_cells(&configs);
    labels
        .into_iter()
        .zip(configs)
        .zip(episodes)
        .map(|(((variant, seed), config), episode)| SweepRun {
            variant,
            seed,
            config,
            episode,
        })
        .collect()
}

/// Summary cells of finished runs. Runs carrying baselines expand into one
/// cell per estimator.
pub fn sweep_cells(runs: &[SweepRun]) -> Vec<SweepCell> {
    let mut out = Vec::new();
    for run in runs {
        out.push(cell(&run.variant, run.seed, &run.episode));
        for kind in &run.config.baselines {
            let name = kind.name();
            let mut c = cell(name, run.seed, &run.episode);
            if let Some(b) = c
                .summary
                .as_ref()
                .and_then(|s| s.baselines.iter().find(|b| b.name == name))
            {
                c.steady_error = b.windows.first().map_or(f64::NAN, |w| w.mean);
                c.last_half_error = b.last_half_mean;
            }
            out.push(c);
        }
    }
    out
}

/// Runs the variant matrix of `kind` over `seeds`. Failed episodes become
/// cells with `error` set; the sweep itself never aborts.
pub fn sweep(kind: SweepKind, base: &ScenarioConfig, seeds: &[u64]) -> Vec<SweepCell> {
    sweep_cells(&sweep_runs(kind, base, seeds))
}

/// Per-variant statistics over seeds; failed cells are counted, not averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub variant: String,
    pub runs: usize,
    pub failures: usize,
    pub steady_mean: f64,
    pub steady_sd: f64,
    pub last_half_mean: f64,
    pub last_half_sd: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Groups cells by variant, in order of first appearance.
pub fn variant_stats(cells: &[SweepCell]) -> Vec<VariantStats> {
    let mut order: Vec<&str> = Vec::new();
    for c in cells {
        if !order.contains(&c.variant.as_str()) {
            order.push(&c.variant);
        }
    }
    order
        .into_iter()
        .map(|v| {
            let group: Vec<&SweepCell> = cells.iter().filter(|c| c.variant == v).collect();
            let ok: Vec<&&SweepCell> = group
                .iter()
                .filter(|c| c.error.is_none() && c.steady_error.is_finite())
                .collect();
            let steady: Vec<f64> = ok.iter().map(|c| c.steady_error).collect();
            let half: Vec<f64> = ok.iter().map(|c| c.last_half_error).collect();
            let (steady_mean, steady_sd) = mean_sd(&steady);
            let (last_half_mean, last_half_sd) = mean_sd(&half);
            VariantStats {
                variant: v.to_string(),
                runs: group.len(),
                failures: group.len() - ok.len(),
                steady_mean,
                steady_sd,
                last_half_mean,
                last_half_sd,
            }
        })
        .collect()
}
