//! Energy model and simulator for dual-mode (Fast-Wake / Deep-Sleep) Energy
//! Efficient Ethernet interfaces that apply frame coalescing.
//!
//! The crate is split along the lines of the analysis it supports:
//!
//! - [`gamma`]: integer-order regularized incomplete gamma kernel.
//! - [`model`]: PHY/coalescing domain types and the Poisson closed forms for
//!   the Deep-Sleep probability, mean sleeping and transition times, and the
//!   normalized energy ratio.
//! - [`oracle`]: Monte-Carlo evaluation of the same cycle quantities for an
//!   arbitrary renewal arrival process.
//! - [`sim`]: event-driven simulator of the seven-state PHY machine.
//! - [`traffic`]: Poisson and trace-replay arrival sources.
//!
//! The analytical code is generic over the floating-point type through
//! [`Scalar`]; the `*64` / `*32` aliases below name the common instantiations.

// `!(x > 0)` is used on purpose: it rejects NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gamma;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod sim;
pub mod traffic;

pub use error::{ModelError, SimError, TraceError, TraceErrorKind};
pub use gamma::{regularized_lower_gamma, regularized_upper_gamma};
pub use model::{
    energy_ratio, expected_deep_sleep, expected_fast_wake, expected_transition, p_deep,
    CoalescingConfig, ModelBreakdown, PhyProfile,
};
pub use oracle::{estimate_cycle_quantities, Estimate, OracleEstimate, SplitSampler};
pub use scalar::Scalar;
pub use sim::{simulate, PhyState, SimReport, SimTime};
pub use traffic::{load_to_lambda, parse_trace, TraceRecord, TrafficSpec};

pub type PhyProfile64 = PhyProfile<f64>;
pub type PhyProfile32 = PhyProfile<f32>;
pub type CoalescingConfig64 = CoalescingConfig<f64>;
pub type CoalescingConfig32 = CoalescingConfig<f32>;
pub type ModelBreakdown64 = ModelBreakdown<f64>;
pub type ModelBreakdown32 = ModelBreakdown<f32>;
pub type OracleEstimate64 = OracleEstimate<f64>;
