//! Command-line definition and flag merging.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{pair_thresholds, parse_seeds, ExperimentConfig, Mode, OutputFormat};
use crate::RunError;

#[derive(Debug, Parser)]
#[command(
    name = "eee-coalesce",
    version,
    about = "Frame coalescing on dual-mode EEE links: model, simulator and oracle"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep loads × thresholds for the selected modes.
    Sweep(CommonArgs),
    /// Compare model, simulator and oracle; exits 1 when out of tolerance.
    Validate(CommonArgs),
    /// Replay a `timestamp_seconds,size_bytes` trace file.
    Trace {
        path: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte-Carlo cycle estimates scored against the closed forms.
    Oracle(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// key=value configuration file; flags override it.
    #[arg(long)]
    pub profile_file: Option<PathBuf>,
    /// Offered loads in Gb/s, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub load: Vec<f64>,
    /// Fast-Wake thresholds, paired with --qd (a single value is broadcast).
    #[arg(long, value_delimiter = ',')]
    pub qf: Vec<u32>,
    /// Deep-Sleep thresholds.
    #[arg(long, value_delimiter = ',')]
    pub qd: Vec<u32>,
    /// Simulated seconds per run.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Seed count N (seeds 1..=N), a range a..b, or a list.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Multiplier applied to trace timestamps.
    #[arg(long)]
    pub rate_scale: Option<f64>,
    /// Low-power dwell cap in µs.
    #[arg(long)]
    pub max_dwell: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Cycles per oracle estimate.
    #[arg(long)]
    pub cycles: Option<u64>,
    /// Frame size in bytes for Poisson traffic.
    #[arg(long)]
    pub frame_size: Option<u32>,
    /// Allowed |φ_model − φ_sim| for validate.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

impl CommonArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<ExperimentConfig, RunError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.profile_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_file(&text)?;
        }
        if !self.load.is_empty() {
            cfg.loads_gbps = self.load.clone();
        }
        if !self.qf.is_empty() || !self.qd.is_empty() {
            let qf: Vec<u32> = if self.qf.is_empty() {
                cfg.thresholds.iter().map(|t| t.0).collect()
            } else {
                self.qf.clone()
            };
            let qd: Vec<u32> = if self.qd.is_empty() {
                cfg.thresholds.iter().map(|t| t.1).collect()
            } else {
                self.qd.clone()
            };
            cfg.thresholds = pair_thresholds(&qf, &qd)?;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = Some(h);
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s).map_err(RunError::Config)?;
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(r) = self.rate_scale {
            cfg.rate_scale = r;
        }
        if let Some(d) = self.max_dwell {
            cfg.max_dwell = Some(d * 1e-6);
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(c) = self.cycles {
            cfg.oracle_cycles = c;
        }
        if let Some(f) = self.frame_size {
            cfg.frame_size = f;
        }
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
