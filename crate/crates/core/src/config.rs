//! Scenario configuration: JSON in, fully resolved defaults out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::MotionMode;
use crate::error::{GbtError, Result};
use crate::planner::PlannerConfig;
use crate::vehicle::AuvParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Case1,
    Case2,
    Case3,
    GpSample,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub kind: TargetKind,
    /// Initial heading of the nonholonomic target (rad).
    pub case3_heading: f64,
    /// Fine integration step for ODE-driven targets (s).
    pub ode_step: f64,
    /// Prior used to draw `gp_sample` targets.
    pub gp_length_scale: f64,
    pub gp_signal_var: f64,
    /// `[t, x, y]` knots for `custom`, interpolated with cubic Hermite segments.
    pub waypoints: Vec<[f64; 3]>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            kind: TargetKind::Case1,
            case3_heading: 0.0,
            ode_step: 1e-3,
            gp_length_scale: 2.0,
            gp_signal_var: 1.0,
            waypoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Sampling period `T` (s).
    pub period: f64,
    /// Per-axis position noise of the bearing model (m).
    pub sigma_eps: f64,
    /// Window capacity `N_c`.
    pub capacity: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            period: 0.1,
            sigma_eps: 0.001,
            capacity: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Hyperparameters used before the first tuning and as its warm start.
    pub length_scale: f64,
    pub signal_var: f64,
    pub delta: f64,
    pub tune_every_k: usize,
    /// Skip tuning and keep the kernel above fixed.
    pub fixed_kernel: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            length_scale: 2.0,
            signal_var: 1.0,
            delta: 0.05,
            tune_every_k: 1,
            fixed_kernel: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Plkf,
    Pr,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Plkf => "plkf",
            BaselineKind::Pr => "pr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub plkf_q_accel: f64,
    pub pr_order: usize,
    /// Number of most recent samples the polynomial is fitted to.
    pub pr_window: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            plkf_q_accel: 0.1,
            pr_order: 4,
            pr_window: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: OutputFormat,
    /// Write measured wall time in the `ms` column. Off by default so logs are
    /// byte-reproducible.
    pub log_wall_time: bool,
    pub plots: bool,
    pub log_scale: bool,
    pub snapshot_times: Vec<f64>,
    /// `[t0, t1]` windows for the summary error statistics.
    pub error_windows: Vec<[f64; 2]>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: OutputFormat::Csv,
            log_wall_time: false,
            plots: true,
            log_scale: true,
            snapshot_times: vec![5.0, 10.0, 15.0, 20.0],
            error_windows: vec![[10.0, 20.0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialState {
    pub eta: [f64; 3],
    pub nu: [f64; 3],
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            eta: [1.5, 0.0, std::f64::consts::FRAC_PI_2],
            nu: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub target: TargetConfig,
    pub vehicle: AuvParams,
    pub initial_state: InitialState,
    pub sensor: SensorConfig,
    pub tracker: TrackerConfig,
    pub planner: PlannerConfig,
    pub mode: MotionMode,
    /// Multiplier on the wrench limits (motion-ability studies).
    pub ability_scale: f64,
    pub baselines: Vec<BaselineKind>,
    pub baseline: BaselineConfig,
    /// Episode length (s).
    pub duration: f64,
    pub rk4_step: f64,
    pub seed: u64,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            target: TargetConfig::default(),
            vehicle: AuvParams::default(),
            initial_state: InitialState::default(),
            sensor: SensorConfig::default(),
            tracker: TrackerConfig::default(),
            planner: PlannerConfig::default(),
            mode: MotionMode::Gbt,
            ability_scale: 1.0,
            baselines: vec![BaselineKind::Plkf, BaselineKind::Pr],
            baseline: BaselineConfig::default(),
            duration: 20.0,
            rk4_step: crate::vehicle::DEFAULT_RK4_STEP,
            seed: 0,
            output: OutputConfig::default(),
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> GbtError {
    GbtError::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.planner.validate()?;
        positive("target.ode_step", self.target.ode_step)?;
        positive("target.gp_length_scale", self.target.gp_length_scale)?;
        positive("target.gp_signal_var", self.target.gp_signal_var)?;
        if self.target.kind == TargetKind::Custom {
            if self.target.waypoints.len() < 2 {
                return Err(invalid(
                    "target.waypoints",
                    "custom targets need at least two knots",
                ));
            }
            if self
                .target
                .waypoints
                .windows(2)
                .any(|w| !(w[1][0] > w[0][0]))
            {
                return Err(invalid(
                    "target.waypoints",
                    "knot times must be strictly increasing",
                ));
            }
        }
        if self
            .initial_state
            .eta
            .iter()
            .chain(&self.initial_state.nu)
            .any(|v| !v.is_finite())
        {
            return Err(invalid("initial_state", "must be finite"));
        }
        positive("sensor.period", self.sensor.period)?;
        if !(self.sensor.sigma_eps >= 0.0 && self.sensor.sigma_eps.is_finite()) {
            return Err(invalid("sensor.sigma_eps", "must be nonnegative"));
        }
        if self.sensor.capacity < 1 {
            return Err(invalid("sensor.capacity", "must be at least 1"));
        }
        positive("tracker.length_scale", self.tracker.length_scale)?;
        positive("tracker.signal_var", self.tracker.signal_var)?;
        if !(self.tracker.delta > 0.0 && self.tracker.delta <= 1.0) {
            return Err(invalid("tracker.delta", "must lie in (0, 1]"));
        }
        if self.tracker.tune_every_k < 1 {
            return Err(invalid("tracker.tune_every_k", "must be at least 1"));
        }
        if (self.planner.segment - self.sensor.period).abs() > 1e-12 {
            return Err(invalid("planner.segment", "must equal sensor.period"));
        }
        positive("ability_scale", self.ability_scale)?;
        if !(self.baseline.plkf_q_accel >= 0.0) {
            return Err(invalid("baseline.plkf_q_accel", "must be nonnegative"));
        }
        if self.baseline.pr_window < 2 {
            return Err(invalid("baseline.pr_window", "must be at least 2"));
        }
        positive("duration", self.duration)?;
        positive("rk4_step", self.rk4_step)?;
        for w in &self.output.error_windows {
            if !(w[1] >= w[0]) {
                return Err(invalid(
                    "output.error_windows",
                    "each window needs t0 <= t1",
                ));
            }
        }
        Ok(())
    }

    /// Number of control steps, `round(duration / period)`.
    pub fn steps(&self) -> usize {
        (self.duration / self.sensor.period).round() as usize
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| GbtError::InvalidConfig {
            field: parse_error_field(&e.to_string()),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON with every field present.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact resolved JSON, hex encoded.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(compact.as_bytes()))
    }
}

fn parse_error_field(msg: &str) -> String {
    // serde reports "unknown field `x`" / "missing field `x`"; surface the name.
    msg.split('`').nth(1).unwrap_or("<document>").to_string()
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| GbtError::Io {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    // A previously echoed `{hash, config}` document loads as its config.
    if let Ok(serde_json::Value::Object(map)) = serde_json::from_str::<serde_json::Value>(&text) {
        if map.len() == 2 && map.contains_key("hash") {
            if let Some(inner) = map.get("config") {
                let cfg = ScenarioConfig::from_json(&inner.to_string())?;
                if map["hash"].as_str() != Some(cfg.hash().as_str()) {
                    return Err(invalid("hash", "does not match the embedded config"));
                }
                return Ok(cfg);
            }
        }
    }
    ScenarioConfig::from_json(&text)
}

/// Writes `config.resolved.json` (with its hash) into `out_dir`.
pub fn echo_config(cfg: &ScenarioConfig, out_dir: &Path) -> Result<std::path::PathBuf> {
    let path = out_dir.join("config.resolved.json");
    let body = serde_json::json!({ "hash": cfg.hash(), "config": cfg });
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&body).expect("serializes"),
    )
    .map_err(|e| GbtError::Io {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(path)
}
