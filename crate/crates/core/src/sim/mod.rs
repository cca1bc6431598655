//! Discrete-event simulator of a dual-mode EEE transmitter.
//!
//! Time is kept as integer picoseconds ([`SimTime`]) so state intervals and
//! the per-state time buckets add up exactly.

mod engine;
mod event;
mod time;

pub use engine::{
    simulate, simulate_source, simulate_with, CycleBreakdown, SimOptions, SimReport, Simulator,
    StateInterval, StateTimes, WakeReason,
};
pub use event::{EventKey, EventQueue};
pub use time::SimTime;

/// PHY operating states. Transitions are named source-to-target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhyState {
    Active,
    AtoF,
    FastWake,
    FtoD,
    DeepSleep,
    FtoA,
    DtoA,
}

impl PhyState {
    pub fn is_transition(self) -> bool {
        matches!(
            self,
            PhyState::AtoF | PhyState::FtoD | PhyState::FtoA | PhyState::DtoA
        )
    }

    /// States the machine may move to from `self`.
    pub fn successors(self) -> &'static [PhyState] {
        match self {
            PhyState::Active => &[PhyState::AtoF],
            PhyState::AtoF => &[PhyState::FastWake],
            PhyState::FastWake => &[PhyState::FtoA, PhyState::FtoD],
            PhyState::FtoD => &[PhyState::DeepSleep],
            PhyState::DeepSleep => &[PhyState::DtoA],
            PhyState::FtoA | PhyState::DtoA => &[PhyState::Active],
        }
    }
}
