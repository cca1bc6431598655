//! Experiment runner: load sweeps over the analytical model, the simulator
//! and the Monte-Carlo oracle, trace replay, and the model/simulation
//! validation gate.

// `!(x > 0)` is used on purpose: it rejects NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod report;
pub mod run;
pub mod stats;

pub use config::{ExperimentConfig, Mode, OutputFormat};
pub use report::{Phi, ResultRow, RowMode};
pub use run::{cmd_oracle, cmd_sweep, cmd_trace, cmd_validate, OracleCheck, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] eee_core::ModelError),
    #[error(transparent)]
    Sim(#[from] eee_core::SimError),
    #[error(transparent)]
    Trace(#[from] eee_core::TraceError),
    #[error("simulation invariant violated at load {load} Gb/s, Q_f={qf}, Q_d={qd}, seed {seed}: {detail}")]
    Invariant {
        load: f64,
        qf: u32,
        qd: u32,
        seed: u64,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
