//! Arrival sources: Poisson frames of fixed size and replay of a plain-text
//! trace.
//!
//! Trace format, one frame per line:
//!
//! ```text
//! # comment
//! timestamp_seconds,frame_bytes
//! ```
//!
//! Timestamps are decimal floats relative to trace start and must be
//! non-decreasing; sizes are integers in `1..=65535`. LF line endings, with an
//! optional CR. Blank lines are skipped.

use std::io::BufRead;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, SimError, TraceError, TraceErrorKind};

/// Frame size used when none is given.
pub const DEFAULT_FRAME_BYTES: u32 = 1500;

/// Spacing applied to replayed frames whose (scaled) timestamps collide.
pub const TIE_SPACING: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub timestamp: f64,
    pub size: u32,
}

/// One frame arrival: time in seconds and size in bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub size: u32,
}

pub fn parse_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut records = Vec::new();
    let mut prev: Option<f64> = None;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let err = |kind| TraceError::Line {
            line: line_no,
            kind,
        };
        let line = line.map_err(|e| err(TraceErrorKind::Io(e.to_string())))?;
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (ts, size) = line
            .split_once(',')
            .ok_or_else(|| err(TraceErrorKind::MissingField))?;
        let (ts, size) = (ts.trim(), size.trim());
        let timestamp: f64 = ts
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite() && *t >= 0.0)
            .ok_or_else(|| err(TraceErrorKind::BadTimestamp(ts.to_string())))?;
        let size: u64 = size
            .parse()
            .map_err(|_| err(TraceErrorKind::BadSize(size.to_string())))?;
        if !(1..=65535).contains(&size) {
            return Err(err(TraceErrorKind::SizeOutOfRange(size)));
        }
        if let Some(p) = prev {
            if timestamp < p {
                return Err(err(TraceErrorKind::NonMonotone {
                    prev: p,
                    got: timestamp,
                }));
            }
        }
        prev = Some(timestamp);
        records.push(TraceRecord {
            timestamp,
            size: size as u32,
        });
    }
    Ok(records)
}

pub fn parse_trace_str(input: &str) -> Result<Vec<TraceRecord>, TraceError> {
    parse_trace(input.as_bytes())
}

/// Writes records in the trace format; the inverse of [`parse_trace`].
pub fn write_trace<W: std::io::Write>(records: &[TraceRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{:e},{}", r.timestamp, r.size)?;
    }
    Ok(())
}

/// Frames per second carried by `load_bps` of `frame_bytes`-byte frames.
pub fn load_to_lambda(load_bps: f64, frame_bytes: f64) -> Result<f64, ModelError> {
    if !(load_bps > 0.0) || !(frame_bytes > 0.0) {
        return Err(ModelError::domain(format!(
            "load and frame size must be > 0, got {load_bps} b/s, {frame_bytes} B"
        )));
    }
    Ok(load_bps / (8.0 * frame_bytes))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStats {
    pub records: usize,
    pub total_bytes: u64,
    /// Span from first to last timestamp, after scaling.
    pub duration: f64,
}

impl TraceStats {
    /// Mean arrival rate in frames/s, `(n - 1) / span`.
    pub fn lambda(&self) -> Option<f64> {
        (self.records >= 2 && self.duration > 0.0)
            .then(|| (self.records - 1) as f64 / self.duration)
    }

    pub fn mean_frame_bytes(&self) -> f64 {
        self.total_bytes as f64 / self.records as f64
    }

    /// Offered load in bit/s.
    pub fn load_bps(&self) -> Option<f64> {
        self.lambda().map(|l| l * self.mean_frame_bytes() * 8.0)
    }
}

/// Arrival process description.
#[derive(Debug, Clone, PartialEq)]
pub enum TrafficSpec {
    Poisson {
        lambda: f64,
        frame_size: u32,
    },
    Trace {
        records: Arc<[TraceRecord]>,
        rate_scale: f64,
    },
}

impl TrafficSpec {
    pub fn poisson(lambda: f64, frame_size: u32) -> Result<Self, ModelError> {
        if !(lambda > 0.0) || !lambda.is_finite() || frame_size == 0 {
            return Err(ModelError::domain(format!(
                "poisson traffic needs rate > 0 and frame size > 0, got {lambda} f/s, {frame_size} B"
            )));
        }
        Ok(TrafficSpec::Poisson { lambda, frame_size })
    }

    pub fn poisson_load(load_bps: f64, frame_size: u32) -> Result<Self, ModelError> {
        Self::poisson(load_to_lambda(load_bps, frame_size as f64)?, frame_size)
    }

    pub fn trace(records: Vec<TraceRecord>, rate_scale: f64) -> Result<Self, TraceError> {
        if records.is_empty() {
            return Err(TraceError::Empty);
        }
        if !(rate_scale > 0.0) || !rate_scale.is_finite() {
            return Err(TraceError::BadScale(rate_scale));
        }
        Ok(TrafficSpec::Trace {
            records: records.into(),
            rate_scale,
        })
    }

    /// Re-checks the constructor invariants, e.g. after manual construction.
    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            TrafficSpec::Poisson { lambda, frame_size } => {
                Self::poisson(*lambda, *frame_size)?;
            }
            TrafficSpec::Trace {
                records,
                rate_scale,
            } => {
                if records.is_empty() {
                    return Err(TraceError::Empty.into());
                }
                if !(*rate_scale > 0.0) || !rate_scale.is_finite() {
                    return Err(TraceError::BadScale(*rate_scale).into());
                }
            }
        }
        Ok(())
    }

    /// Offered utilization on a link of `line_rate` bit/s, when defined.
    pub fn utilization(&self, line_rate: f64) -> Option<f64> {
        match self {
            TrafficSpec::Poisson { lambda, frame_size } => {
                Some(lambda * *frame_size as f64 * 8.0 / line_rate)
            }
            TrafficSpec::Trace { .. } => self.trace_stats()?.load_bps().map(|b| b / line_rate),
        }
    }

    pub fn trace_stats(&self) -> Option<TraceStats> {
        match self {
            TrafficSpec::Trace {
                records,
                rate_scale,
            } => {
                let first = records.first()?.timestamp;
                let last = records.last()?.timestamp;
                Some(TraceStats {
                    records: records.len(),
                    total_bytes: records.iter().map(|r| r.size as u64).sum(),
                    duration: (last - first) * rate_scale,
                })
            }
            TrafficSpec::Poisson { .. } => None,
        }
    }

    /// Fresh arrival source; `seed` only matters for Poisson.
    pub fn source(&self, seed: u64) -> SourceState {
        match self {
            TrafficSpec::Poisson { lambda, frame_size } => {
                SourceState::Poisson(PoissonSource::new(*lambda, *frame_size, seed))
            }
            TrafficSpec::Trace {
                records,
                rate_scale,
            } => SourceState::Trace(TraceSource::new(records.clone(), *rate_scale)),
        }
    }
}

pub trait ArrivalSource {
    /// Next arrival, or `None` at end of stream. Arrival times strictly
    /// increase.
    fn next_arrival(&mut self) -> Option<Arrival>;
}

#[derive(Debug, Clone)]
pub struct PoissonSource {
    rng: ChaCha8Rng,
    lambda: f64,
    size: u32,
    now: f64,
}

impl PoissonSource {
    pub fn new(lambda: f64, size: u32, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            lambda,
            size,
            now: 0.0,
        }
    }

    /// Exponential gap by inverse CDF; zero-length draws are redrawn.
    fn gap(&mut self) -> f64 {
        loop {
            let u: f64 = 1.0 - self.rng.random::<f64>();
            let g = -u.ln() / self.lambda;
            if g > 0.0 {
                return g;
            }
        }
    }
}

impl ArrivalSource for PoissonSource {
    fn next_arrival(&mut self) -> Option<Arrival> {
        self.now += self.gap();
        Some(Arrival {
            time: self.now,
            size: self.size,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TraceSource {
    records: Arc<[TraceRecord]>,
    cursor: usize,
    scale: f64,
    last: Option<f64>,
}

impl TraceSource {
    pub fn new(records: Arc<[TraceRecord]>, scale: f64) -> Self {
        Self {
            records,
            cursor: 0,
            scale,
            last: None,
        }
    }
}

impl ArrivalSource for TraceSource {
    fn next_arrival(&mut self) -> Option<Arrival> {
        let r = self.records.get(self.cursor)?;
        self.cursor += 1;
        let mut time = r.timestamp * self.scale;
        if let Some(last) = self.last {
            if time <= last {
                time = last + TIE_SPACING;
            }
        }
        self.last = Some(time);
        Some(Arrival { time, size: r.size })
    }
}

/// Either kind of source, so the simulator stays monomorphic.
// Unboxed: one per simulation, and the Poisson variant is the hot path.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum SourceState {
    Poisson(PoissonSource),
    Trace(TraceSource),
}

impl ArrivalSource for SourceState {
    fn next_arrival(&mut self) -> Option<Arrival> {
        match self {
            SourceState::Poisson(s) => s.next_arrival(),
            SourceState::Trace(s) => s.next_arrival(),
        }
    }
}

/// Replays a fixed list of arrivals; handy for scripted scenarios.
#[derive(Debug, Clone)]
pub struct ScriptedSource {
    arrivals: std::vec::IntoIter<Arrival>,
}

impl ScriptedSource {
    pub fn new(arrivals: Vec<Arrival>) -> Self {
        Self {
            arrivals: arrivals.into_iter(),
        }
    }
}

impl ArrivalSource for ScriptedSource {
    fn next_arrival(&mut self) -> Option<Arrival> {
        self.arrivals.next()
    }
}
