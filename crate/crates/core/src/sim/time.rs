use std::fmt;
use std::ops::{Add, Sub};

const PS_PER_SEC: f64 = 1e12;

/// Simulation instant or duration in whole picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Nearest picosecond; negative and NaN inputs map to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        let ps = (s * PS_PER_SEC).round();
        if ps.is_nan() || ps <= 0.0 {
            SimTime(0)
        } else {
            SimTime(ps as u64)
        }
    }

    pub fn from_nanos(ns: u64) -> Self {
        SimTime(ns * 1_000)
    }

    /// Exact for values with at most six decimals, e.g. `from_micros(0.34)`.
    pub fn from_micros(us: f64) -> Self {
        SimTime((us * 1e6).round() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_SEC
    }

    pub fn as_picos(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl std::iter::Sum for SimTime {
    fn sum<I: Iterator<Item = SimTime>>(iter: I) -> SimTime {
        SimTime(iter.map(|t| t.0).sum())
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0 as f64 / 1e6)
    }
}
