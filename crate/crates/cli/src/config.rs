//! Experiment configuration.
//!
//! Files are plain `key = value` lines grouped under `[section]` headers:
//!
//! ```text
//! [profile]
//! t_atof_us = 0.90
//! t_ftoa_us = 0.34
//! t_ftod_us = 1.00
//! t_dtoa_us = 5.50
//! t_idle_us = 3.50
//! line_rate_gbps = 40
//! phi_fast = 0.7
//! phi_deep = 0.1
//!
//! [traffic]
//! frame_size = 1500
//! rate_scale = 1.0
//!
//! [coalescing]
//! qf = 1, 2, 8, 32
//! qd = 1, 8, 32, 128
//! max_dwell_us = 50
//!
//! [experiment]
//! loads = 2, 6, 10
//! horizon = 1.0
//! seeds = 1..10
//! cycles = 1000000
//! mode = both
//! format = csv
//! tolerance = 0.015
//! ```
//!
//! Command-line flags are applied after the file and take precedence.

use std::fmt;
use std::str::FromStr;

use eee_core::{CoalescingConfig, PhyProfile};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Model,
    Sim,
    Both,
    Oracle,
}

impl Mode {
    pub fn includes_model(self) -> bool {
        matches!(self, Mode::Model | Mode::Both)
    }

    pub fn includes_sim(self) -> bool {
        matches!(self, Mode::Sim | Mode::Both)
    }

    pub fn includes_oracle(self) -> bool {
        self == Mode::Oracle
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "model" => Ok(Mode::Model),
            "sim" => Ok(Mode::Sim),
            "both" => Ok(Mode::Both),
            "oracle" => Ok(Mode::Oracle),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub profile: PhyProfile<f64>,
    pub frame_size: u32,
    pub thresholds: Vec<(u32, u32)>,
    pub loads_gbps: Vec<f64>,
    /// Simulated seconds per run. `None` means 1 s for Poisson runs and the
    /// trace span for trace replay.
    pub horizon: Option<f64>,
    pub seeds: Vec<u64>,
    pub format: OutputFormat,
    pub mode: Mode,
    /// Low-power dwell cap in seconds.
    pub max_dwell: Option<f64>,
    pub rate_scale: f64,
    /// Cycles per oracle estimate.
    pub oracle_cycles: u64,
    /// Maximum |φ_model − φ_sim| accepted by `validate`.
    pub tolerance: f64,
    /// Oracle deviation limit in standard errors for `validate`.
    pub z_limit: f64,
}

pub const DEFAULT_HORIZON: f64 = 1.0;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: PhyProfile::dual_mode_40g(),
            frame_size: 1500,
            thresholds: vec![(1, 1), (2, 8), (8, 32), (32, 128)],
            loads_gbps: (0..10).map(|i| 2.0 + 4.0 * i as f64).collect(),
            horizon: None,
            seeds: (1..=10).collect(),
            format: OutputFormat::Csv,
            mode: Mode::Both,
            max_dwell: None,
            rate_scale: 1.0,
            oracle_cycles: 1_000_000,
            tolerance: 0.015,
            z_limit: 3.0,
        }
    }
}

impl ExperimentConfig {
    pub fn horizon_or_default(&self) -> f64 {
        self.horizon.unwrap_or(DEFAULT_HORIZON)
    }

    pub fn coalescing(&self, qf: u32, qd: u32) -> Result<CoalescingConfig<f64>, RunError> {
        let mut cfg = CoalescingConfig::new(qf, qd).map_err(|e| RunError::Config(e.to_string()))?;
        if let Some(cap) = self.max_dwell {
            cfg = cfg
                .with_max_dwell(cap)
                .map_err(|e| RunError::Config(e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked before running anything.
    pub fn validate(&self) -> Result<(), RunError> {
        let cfg_err = |m: String| Err(RunError::Config(m));
        self.profile
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        if self.frame_size == 0 || self.frame_size > 65535 {
            return cfg_err(format!("frame size {} out of range", self.frame_size));
        }
        if self.thresholds.is_empty() {
            return cfg_err("no (Q_f, Q_d) thresholds".into());
        }
        for &(qf, qd) in &self.thresholds {
            self.coalescing(qf, qd)?;
        }
        if self.loads_gbps.is_empty() {
            return cfg_err("no loads".into());
        }
        if let Some(l) = self
            .loads_gbps
            .iter()
            .find(|l| !(**l > 0.0) || !l.is_finite())
        {
            return cfg_err(format!("load must be > 0, got {l}"));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) || !h.is_finite() {
                return cfg_err(format!("horizon must be > 0, got {h}"));
            }
        }
        if self.seeds.is_empty() {
            return cfg_err("at least one seed (repetition) required".into());
        }
        if !(self.rate_scale > 0.0) || !self.rate_scale.is_finite() {
            return cfg_err(format!("rate scale must be > 0, got {}", self.rate_scale));
        }
        if self.oracle_cycles == 0 {
            return cfg_err("oracle cycles must be >= 1".into());
        }
        if !(self.tolerance >= 0.0) || !(self.z_limit > 0.0) {
            return cfg_err("tolerances must be positive".into());
        }
        Ok(())
    }

    /// Applies a configuration file on top of `self`.
    pub fn apply_file(&mut self, text: &str) -> Result<(), RunError> {
        let mut section = String::new();
        let mut qf: Option<Vec<u32>> = None;
        let mut qd: Option<Vec<u32>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_ascii_lowercase();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| RunError::Config(format!("line {line_no}: expected key = value")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            let bad =
                |what: &str| RunError::Config(format!("line {line_no}: invalid {what} `{value}`"));
            let num = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
            let us = |what: &str| num(what).map(|v| v * 1e-6);
            match (section.as_str(), key.as_str()) {
                ("profile", "t_atof_us") => self.profile.t_atof = us("t_atof_us")?,
                ("profile", "t_ftoa_us") => self.profile.t_ftoa = us("t_ftoa_us")?,
                ("profile", "t_ftod_us") => self.profile.t_ftod = us("t_ftod_us")?,
                ("profile", "t_dtoa_us") => self.profile.t_dtoa = us("t_dtoa_us")?,
                ("profile", "t_idle_us") => self.profile.t_idle = us("t_idle_us")?,
                ("profile", "line_rate_gbps") => self.profile.line_rate = num("line rate")? * 1e9,
                ("profile", "phi_fast") => self.profile.phi_fast = num("phi_fast")?,
                ("profile", "phi_deep") => self.profile.phi_deep = num("phi_deep")?,
                ("traffic", "frame_size") => {
                    self.frame_size = value.parse().map_err(|_| bad("frame size"))?
                }
                ("traffic", "rate_scale") => self.rate_scale = num("rate scale")?,
                ("coalescing", "qf") => qf = Some(parse_list(value).map_err(|_| bad("qf list"))?),
                ("coalescing", "qd") => qd = Some(parse_list(value).map_err(|_| bad("qd list"))?),
                ("coalescing", "max_dwell_us") => self.max_dwell = Some(us("max dwell")?),
                ("experiment", "loads") => {
                    self.loads_gbps = parse_list(value).map_err(|_| bad("load list"))?
                }
                ("experiment", "horizon") => self.horizon = Some(num("horizon")?),
                ("experiment", "seeds") => {
                    self.seeds = parse_seeds(value).map_err(|_| bad("seeds"))?
                }
                ("experiment", "cycles") => {
                    self.oracle_cycles = value.parse().map_err(|_| bad("cycles"))?
                }
                ("experiment", "mode") => self.mode = value.parse().map_err(|_| bad("mode"))?,
                ("experiment", "format") => {
                    self.format = value.parse().map_err(|_| bad("format"))?
                }
                ("experiment", "tolerance") => self.tolerance = num("tolerance")?,
                (s, k) => {
                    return Err(RunError::Config(format!(
                        "line {line_no}: unknown key `{k}` in [{s}]"
                    )))
                }
            }
        }
        if qf.is_some() || qd.is_some() {
            let qf = qf.unwrap_or_else(|| self.thresholds.iter().map(|t| t.0).collect());
            let qd = qd.unwrap_or_else(|| self.thresholds.iter().map(|t| t.1).collect());
            self.thresholds = pair_thresholds(&qf, &qd)?;
        }
        Ok(())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Model => "model",
            Mode::Sim => "sim",
            Mode::Both => "both",
            Mode::Oracle => "oracle",
        })
    }
}

/// Comma-separated list.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, T::Err> {
    s.split(',').map(|v| v.trim().parse()).collect()
}

/// `N` (seeds 1..=N), `a..b` (inclusive) or an explicit comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|_| format!("bad seed range `{s}`"))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|_| format!("bad seed range `{s}`"))?;
        if b < a {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    if s.contains(',') {
        return parse_list(s).map_err(|_| format!("bad seed list `{s}`"));
    }
    let n: u64 = s.parse().map_err(|_| format!("bad seed count `{s}`"))?;
    Ok((1..=n).collect())
}

/// Pairs Q_f and Q_d lists element-wise; a single-element list is broadcast.
pub fn pair_thresholds(qf: &[u32], qd: &[u32]) -> Result<Vec<(u32, u32)>, RunError> {
    let n = qf.len().max(qd.len());
    let pick = |v: &[u32], i: usize| {
        if v.len() == 1 {
            Some(v[0])
        } else {
            v.get(i).copied()
        }
    };
    (0..n)
        .map(|i| match (pick(qf, i), pick(qd, i)) {
            (Some(f), Some(d)) => Ok((f, d)),
            _ => Err(RunError::Config(format!(
                "qf list ({}) and qd list ({}) lengths differ",
                qf.len(),
                qd.len()
            ))),
        })
        .collect()
}
