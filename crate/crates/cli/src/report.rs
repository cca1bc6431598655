//! Result rows and their CSV / JSON encodings.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Serialize, Serializer};

use crate::config::OutputFormat;

pub const CSV_HEADER: &str =
    "mode,load_gbps,qf,qd,phi,phi_ci,delay_s,delay_ci,rho_f,rho_d,p_d,seed,horizon_s";

pub const UNSTABLE: &str = "unstable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowMode {
    Model,
    Sim,
    Oracle,
}

impl RowMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RowMode::Model => "model",
            RowMode::Sim => "sim",
            RowMode::Oracle => "oracle",
        }
    }
}

/// Energy ratio cell: a number, or the marker for ρ ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    Value(f64),
    Unstable,
}

impl Phi {
    pub fn value(self) -> Option<f64> {
        match self {
            Phi::Value(v) => Some(v),
            Phi::Unstable => None,
        }
    }
}

impl Serialize for Phi {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Phi::Value(v) => s.serialize_f64(*v),
            Phi::Unstable => s.serialize_str(UNSTABLE),
        }
    }
}

/// One output line. Simulation rows carry the mean over seeds and the
/// Student-t 95% half-width; `seed` is then the first seed of the set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub mode: RowMode,
    pub load_gbps: f64,
    pub qf: u32,
    pub qd: u32,
    pub phi: Phi,
    pub phi_ci: Option<f64>,
    pub delay_s: Option<f64>,
    pub delay_ci: Option<f64>,
    pub rho_f: Option<f64>,
    pub rho_d: Option<f64>,
    pub p_d: Option<f64>,
    pub seed: Option<u64>,
    pub horizon_s: Option<f64>,
}

impl ResultRow {
    pub fn unstable(mode: RowMode, load_gbps: f64, qf: u32, qd: u32) -> Self {
        Self {
            mode,
            load_gbps,
            qf,
            qd,
            phi: Phi::Unstable,
            phi_ci: None,
            delay_s: None,
            delay_ci: None,
            rho_f: None,
            rho_d: None,
            p_d: None,
            seed: None,
            horizon_s: None,
        }
    }

    pub fn is_unstable(&self) -> bool {
        self.phi == Phi::Unstable
    }

    fn sort_key(&self) -> (f64, u32, u32, RowMode) {
        (self.load_gbps, self.qf, self.qd, self.mode)
    }

    pub fn csv_line(&self) -> String {
        let mut s = String::with_capacity(160);
        let _ = write!(
            s,
            "{},{},{},{},",
            self.mode.as_str(),
            self.load_gbps,
            self.qf,
            self.qd
        );
        match self.phi {
            Phi::Value(v) => s.push_str(&sci(v)),
            Phi::Unstable => s.push_str(UNSTABLE),
        }
        for v in [
            self.phi_ci,
            self.delay_s,
            self.delay_ci,
            self.rho_f,
            self.rho_d,
            self.p_d,
        ] {
            s.push(',');
            if let Some(v) = v {
                s.push_str(&sci(v));
            }
        }
        s.push(',');
        if let Some(seed) = self.seed {
            let _ = write!(s, "{seed}");
        }
        s.push(',');
        if let Some(h) = self.horizon_s {
            let _ = write!(s, "{h}");
        }
        s
    }
}

/// Nine significant digits in scientific notation.
fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

/// Sorts by (load, Q_f, Q_d, mode) so output order never depends on
/// scheduling.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.sort_key()
            .partial_cmp(&b.sort_key())
            .expect("finite loads")
    });
}

pub fn write_rows<W: Write>(
    rows: &[ResultRow],
    format: OutputFormat,
    mut out: W,
) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in rows {
                writeln!(out, "{}", r.csv_line())?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    out.flush()
}
