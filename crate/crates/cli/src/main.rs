//! `gbt`: run, sweep and check the bearing-only tracking simulator.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gbt_core::checks::{render_table, run_all};
use gbt_core::config::{echo_config, load_config, OutputFormat, ScenarioConfig, TargetKind};
use gbt_core::harness::{
    run_episode, sweep_cells, sweep_runs, variant_stats, Episode, SweepCell, SweepKind,
    VariantStats,
};
use gbt_core::plots::emit_plots;
use gbt_core::records::write_records;

#[derive(Parser)]
#[command(
    name = "gbt",
    version,
    about = "Bearing-only target tracking with GP prediction and flatness-based planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write its log, plots and summary.
    Run(Common),
    /// Run a variant matrix over shared seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "motion-modes")]
        kind: KindArg,
        /// Number of seeds, starting at the config seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// GBT against the PLKF and PR estimators on shared seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
    /// Run the invariant suites and print a pass/fail table.
    Check {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Smaller fuzz corpora.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Overrides the target kind.
    #[arg(long, value_enum)]
    target: Option<TargetArg>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Case1,
    Case2,
    Case3,
    GpSample,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    MotionModes,
    Ability,
    Baselines,
}

impl From<KindArg> for SweepKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::MotionModes => SweepKind::MotionModes,
            KindArg::Ability => SweepKind::Ability,
            KindArg::Baselines => SweepKind::Baselines,
        }
    }
}

fn resolve(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(f) = common.format {
        cfg.output.format = match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    if let Some(t) = common.target {
        cfg.target.kind = match t {
            TargetArg::Case1 => TargetKind::Case1,
            TargetArg::Case2 => TargetKind::Case2,
            TargetArg::Case3 => TargetKind::Case3,
            TargetArg::GpSample => TargetKind::GpSample,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let body = serde_json::to_string_pretty(value)?;
    std::fs::write(path, body + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Log, baseline logs, plots and summary of one episode.
fn write_episode(cfg: &ScenarioConfig, ep: &Episode, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_records(&ep.records, cfg.output.format, dir, "records")?;
    for b in &ep.baselines {
        write_records(
            &b.records,
            cfg.output.format,
            dir,
            &format!("baseline_{}", b.kind.name()),
        )?;
    }
    if cfg.output.plots && !ep.records.is_empty() {
        if let Err(e) = emit_plots(ep, cfg.output.log_scale, dir, "plot") {
            log::warn!("plots skipped: {e}");
        }
    }
    write_json(&dir.join("summary.json"), &ep.summary)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.2}"))
}

fn run(common: &Common) -> Result<bool> {
    let cfg = resolve(common)?;
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    echo_config(&cfg, &common.out)?;
    let ep = run_episode(&cfg)?;
    write_episode(&cfg, &ep, &common.out)?;
    let s = &ep.summary;
    if !common.quiet {
        let window = s.windows.first().map_or("-".to_string(), |w| {
            format!("{:.4} m over [{}, {}] s", w.mean, w.t0, w.t1)
        });
        println!(
            "seed {} steps {} mode {}: mean error {window}, last half {:.4} m, converged at {} s, coverage {:.3}",
            s.seed,
            s.steps,
            s.mode,
            s.last_half_mean,
            fmt_opt(s.convergence_time),
            s.coverage_fraction
        );
        for b in &s.baselines {
            println!(
                "  {}: mean error {:.4} m, last half {:.4} m",
                b.name,
                b.windows.first().map_or(f64::NAN, |w| w.mean),
                b.last_half_mean
            );
        }
        if let Some(f) = &s.failure {
            println!("episode failed: {f}");
        }
        println!("output written to {}", common.out.display());
    }
    Ok(ep.failure.is_none())
}

fn stats_table(stats: &[VariantStats]) -> String {
    let mut out = format!(
        "{:<12} {:>5} {:>8} {:>12} {:>10} {:>12}\n",
        "variant", "runs", "failed", "steady mean", "steady sd", "last half"
    );
    for s in stats {
        out += &format!(
            "{:<12} {:>5} {:>8} {:>12.4} {:>10.4} {:>12.4}\n",
            s.variant, s.runs, s.failures, s.steady_mean, s.steady_sd, s.last_half_mean
        );
    }
    out
}

/// Runs the matrix, writes every cell to `out/<variant>/seed_<n>/` and returns the cells.
fn run_matrix(
    common: &Common,
    kind: SweepKind,
    seeds: u64,
) -> Result<(Vec<SweepCell>, Vec<VariantStats>)> {
    let base = resolve(common)?;
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    echo_config(&base, &common.out)?;
    let seed_list: Vec<u64> = (base.seed..base.seed + seeds).collect();
    let runs = sweep_runs(kind, &base, &seed_list);
    for run in &runs {
        let dir = common
            .out
            .join(&run.variant)
            .join(format!("seed_{}", run.seed));
        match &run.episode {
            Ok(ep) => write_episode(&run.config, ep, &dir)?,
            Err(e) => log::warn!("{} seed {}: {e}", run.variant, run.seed),
        }
    }
    let cells = sweep_cells(&runs);
    let stats = variant_stats(&cells);
    write_json(&common.out.join("cells.json"), &cells)?;
    write_json(&common.out.join("variants.json"), &stats)?;
    Ok((cells, stats))
}

fn sweep(common: &Common, kind: SweepKind, seeds: u64) -> Result<bool> {
    let (cells, stats) = run_matrix(common, kind, seeds)?;
    if !common.quiet {
        print!("{}", stats_table(&stats));
    }
    Ok(cells.iter().all(|c| c.error.is_none()))
}

fn compare(common: &Common, seeds: u64) -> Result<bool> {
    let (cells, stats) = run_matrix(common, SweepKind::Baselines, seeds)?;
    if !common.quiet {
        print!("{}", stats_table(&stats));
        for other in ["plkf", "pr"] {
            let pairs: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.variant == "gbt")
                .filter_map(|g| {
                    cells
                        .iter()
                        .find(|c| c.variant == other && c.seed == g.seed)
                        .map(|o| (g.last_half_error, o.last_half_error))
                })
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .collect();
            let wins = pairs.iter().filter(|(a, b)| a < b).count();
            println!(
                "gbt below {other} (last half) on {wins} of {} seeds",
                pairs.len()
            );
        }
    }
    Ok(cells.iter().all(|c| c.error.is_none()))
}

fn check(out: Option<&Path>, quick: bool, quiet: bool) -> Result<bool> {
    let results = run_all(quick);
    if !quiet {
        print!("{}", render_table(&results));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_json(&dir.join("checks.json"), &results)?;
    }
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Run(c) | Command::Sweep { common: c, .. } | Command::Compare { common: c, .. } => {
            c.quiet
        }
        Command::Check { quiet, .. } => *quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet {
        "error"
    } else {
        "warn"
    }))
    .init();
    let outcome = match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep {
            common,
            kind,
            seeds,
        } => sweep(common, (*kind).into(), *seeds),
        Command::Compare { common, seeds } => compare(common, *seeds),
        Command::Check { out, quick, quiet } => check(out.as_deref(), *quick, *quiet),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
