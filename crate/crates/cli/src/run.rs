//! Sweep, validation, trace replay and oracle commands.

use std::io::BufReader;
use std::path::Path;

use eee_core::oracle::{Comparison, PoissonReference};
use eee_core::{
    energy_ratio, estimate_cycle_quantities, load_to_lambda, parse_trace, simulate, ModelBreakdown,
    ModelError, SimReport, SplitSampler, TraceError, TraceErrorKind, TrafficSpec,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::report::{sort_rows, Phi, ResultRow, RowMode};
use crate::stats::mean_ci95;
use crate::RunError;

/// One (load, thresholds) grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    load_gbps: f64,
    qf: u32,
    qd: u32,
}

fn grid(cfg: &ExperimentConfig) -> Vec<Point> {
    cfg.loads_gbps
        .iter()
        .flat_map(|&load_gbps| {
            cfg.thresholds
                .iter()
                .map(move |&(qf, qd)| Point { load_gbps, qf, qd })
        })
        .collect()
}

fn is_unstable(cfg: &ExperimentConfig, p: Point) -> bool {
    p.load_gbps * 1e9 >= cfg.profile.line_rate
}

fn lambda_of(cfg: &ExperimentConfig, p: Point) -> Result<f64, RunError> {
    Ok(load_to_lambda(p.load_gbps * 1e9, cfg.frame_size as f64)?)
}

fn model_row(cfg: &ExperimentConfig, p: Point) -> Result<ResultRow, RunError> {
    let lambda = lambda_of(cfg, p)?;
    model_row_at(cfg, p, lambda, cfg.frame_size as f64)
}

fn model_row_at(
    cfg: &ExperimentConfig,
    p: Point,
    lambda: f64,
    frame_bytes: f64,
) -> Result<ResultRow, RunError> {
    let coalescing = cfg.coalescing(p.qf, p.qd)?;
    match energy_ratio(&cfg.profile, &coalescing, lambda, frame_bytes) {
        Ok(b) => Ok(breakdown_row(RowMode::Model, p, &b, None)),
        Err(ModelError::Unstable { .. }) => {
            Ok(ResultRow::unstable(RowMode::Model, p.load_gbps, p.qf, p.qd))
        }
        Err(e) => Err(e.into()),
    }
}

fn breakdown_row(mode: RowMode, p: Point, b: &ModelBreakdown<f64>, seed: Option<u64>) -> ResultRow {
    ResultRow {
        mode,
        load_gbps: p.load_gbps,
        qf: p.qf,
        qd: p.qd,
        phi: Phi::Value(b.phi),
        phi_ci: None,
        delay_s: None,
        delay_ci: None,
        rho_f: Some(b.rho_f),
        rho_d: Some(b.rho_d),
        p_d: Some(b.p_deep),
        seed,
        horizon_s: None,
    }
}

fn run_checked(
    cfg: &ExperimentConfig,
    p: Point,
    traffic: &TrafficSpec,
    horizon: f64,
    seed: u64,
) -> Result<SimReport, RunError> {
    let coalescing = cfg.coalescing(p.qf, p.qd)?;
    let report = simulate(&cfg.profile, &coalescing, traffic, horizon, seed)?;
    report
        .check_invariants()
        .map_err(|detail| RunError::Invariant {
            load: p.load_gbps,
            qf: p.qf,
            qd: p.qd,
            seed,
            detail,
        })?;
    Ok(report)
}

/// Aggregates per-seed reports into one row.
fn sim_row(p: Point, reports: &[(u64, SimReport)], horizon: f64) -> ResultRow {
    let phis: Vec<f64> = reports.iter().map(|(_, r)| r.phi_sim).collect();
    let delays: Vec<f64> = reports
        .iter()
        .map(|(_, r)| r.mean_queue_delay)
        .filter(|d| d.is_finite())
        .collect();
    let (phi, phi_ci) = mean_ci95(&phis);
    let (delay, delay_ci) = mean_ci95(&delays);
    let n = reports.len() as f64;
    let cycles: u64 = reports.iter().map(|(_, r)| r.cycles).sum();
    let deep: u64 = reports.iter().map(|(_, r)| r.deep_cycles).sum();
    ResultRow {
        mode: RowMode::Sim,
        load_gbps: p.load_gbps,
        qf: p.qf,
        qd: p.qd,
        phi: Phi::Value(phi),
        phi_ci,
        delay_s: (!delays.is_empty()).then_some(delay),
        delay_ci,
        rho_f: Some(reports.iter().map(|(_, r)| r.rho_fast()).sum::<f64>() / n),
        rho_d: Some(reports.iter().map(|(_, r)| r.rho_deep()).sum::<f64>() / n),
        p_d: (cycles > 0).then(|| deep as f64 / cycles as f64),
        seed: reports.first().map(|(s, _)| *s),
        horizon_s: Some(horizon),
    }
}

fn sim_rows(cfg: &ExperimentConfig, points: &[Point]) -> Result<Vec<ResultRow>, RunError> {
    let horizon = cfg.horizon_or_default();
    let stable: Vec<Point> = points
        .iter()
        .copied()
        .filter(|p| !is_unstable(cfg, *p))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..stable.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let reports: Vec<(usize, u64, SimReport)> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let p = stable[i];
            let traffic = TrafficSpec::poisson_load(p.load_gbps * 1e9, cfg.frame_size)?;
            Ok((i, seed, run_checked(cfg, p, &traffic, horizon, seed)?))
        })
        .collect::<Result<_, RunError>>()?;

    let mut per_point: Vec<Vec<(u64, SimReport)>> = vec![Vec::new(); stable.len()];
    for (i, seed, r) in reports {
        per_point[i].push((seed, r));
    }
    let mut rows: Vec<ResultRow> = stable
        .iter()
        .zip(&per_point)
        .map(|(p, reps)| sim_row(*p, reps, horizon))
        .collect();
    rows.extend(
        points
            .iter()
            .filter(|p| is_unstable(cfg, **p))
            .map(|p| ResultRow::unstable(RowMode::Sim, p.load_gbps, p.qf, p.qd)),
    );
    Ok(rows)
}

/// Oracle row plus its comparison against the closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub row: ResultRow,
    pub comparison: Option<Comparison>,
}

fn oracle_check(cfg: &ExperimentConfig, p: Point) -> Result<OracleCheck, RunError> {
    if is_unstable(cfg, p) {
        return Ok(OracleCheck {
            row: ResultRow::unstable(RowMode::Oracle, p.load_gbps, p.qf, p.qd),
            comparison: None,
        });
    }
    let lambda = lambda_of(cfg, p)?;
    let coalescing = cfg.coalescing(p.qf, p.qd)?;
    let seed = cfg.seeds[0];
    let est = estimate_cycle_quantities(
        &cfg.profile,
        &coalescing,
        &SplitSampler::poisson(lambda),
        cfg.oracle_cycles,
        seed,
    )?;
    let rho = lambda / cfg.profile.service_rate(cfg.frame_size as f64);
    let b = ModelBreakdown::assemble(
        &cfg.profile,
        rho,
        est.p_deep.mean,
        est.e_tf.mean,
        est.e_td.mean,
    );
    let reference = PoissonReference::new(&cfg.profile, &coalescing, lambda)?;
    Ok(OracleCheck {
        row: breakdown_row(RowMode::Oracle, p, &b, Some(seed)),
        comparison: Some(est.compare(&reference)),
    })
}

fn oracle_checks(cfg: &ExperimentConfig, points: &[Point]) -> Result<Vec<OracleCheck>, RunError> {
    points.par_iter().map(|p| oracle_check(cfg, *p)).collect()
}

/// Cross product of loads, thresholds and the configured modes.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    cfg.validate()?;
    let points = grid(cfg);
    let mut rows = Vec::new();
    if cfg.mode.includes_model() {
        for p in &points {
            rows.push(model_row(cfg, *p)?);
        }
    }
    if cfg.mode.includes_sim() {
        rows.extend(sim_rows(cfg, &points)?);
    }
    if cfg.mode.includes_oracle() {
        rows.extend(oracle_checks(cfg, &points)?.into_iter().map(|c| c.row));
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Oracle rows with their z-scores against the closed forms.
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<Vec<OracleCheck>, RunError> {
    cfg.validate()?;
    oracle_checks(cfg, &grid(cfg))
}

/// Largest model/simulation gap and oracle deviation over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<ResultRow>,
    pub points: usize,
    /// `max |φ_model − mean φ_sim|` with the point where it occurs.
    pub max_phi_gap: f64,
    pub worst_point: Option<(f64, u32, u32)>,
    pub max_oracle_z: f64,
    pub worst_oracle_point: Option<(f64, u32, u32)>,
    pub tolerance: f64,
    pub z_limit: f64,
}

impl ValidationReport {
    pub fn phi_ok(&self) -> bool {
        self.max_phi_gap <= self.tolerance
    }

    pub fn oracle_ok(&self) -> bool {
        self.max_oracle_z <= self.z_limit
    }

    pub fn passed(&self) -> bool {
        self.phi_ok() && self.oracle_ok()
    }

    pub fn summary(&self) -> String {
        let at = |p: Option<(f64, u32, u32)>| match p {
            Some((l, f, d)) => format!(" at {l} Gb/s (Q_f={f}, Q_d={d})"),
            None => String::new(),
        };
        format!(
            "{}: {} points, max |phi_model - phi_sim| = {:.6}{} (tolerance {}), max oracle z = {:.3}{} (limit {})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.points,
            self.max_phi_gap,
            at(self.worst_point),
            self.tolerance,
            self.max_oracle_z,
            at(self.worst_oracle_point),
            self.z_limit,
        )
    }
}

/// Runs model, simulator and oracle over the grid and scores agreement.
/// Unstable points are reported but not scored.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<ValidationReport, RunError> {
    cfg.validate()?;
    let points = grid(cfg);
    let mut rows: Vec<ResultRow> = points
        .iter()
        .map(|p| model_row(cfg, *p))
        .collect::<Result<_, _>>()?;
    rows.extend(sim_rows(cfg, &points)?);
    let checks = oracle_checks(cfg, &points)?;

    let key = |r: &ResultRow| (r.load_gbps, r.qf, r.qd);
    let mut max_phi_gap = 0.0_f64;
    let mut worst_point = None;
    for m in rows.iter().filter(|r| r.mode == RowMode::Model) {
        let sim = rows
            .iter()
            .find(|r| r.mode == RowMode::Sim && key(r) == key(m));
        if let (Some(a), Some(b)) = (m.phi.value(), sim.and_then(|s| s.phi.value())) {
            let gap = (a - b).abs();
            if gap > max_phi_gap || worst_point.is_none() {
                max_phi_gap = gap.max(max_phi_gap);
                worst_point = Some(key(m));
            }
        }
    }
    let mut max_oracle_z = 0.0_f64;
    let mut worst_oracle_point = None;
    for c in &checks {
        if let Some(cmp) = &c.comparison {
            let z = cmp.max_z();
            if z > max_oracle_z || worst_oracle_point.is_none() {
                max_oracle_z = z.max(max_oracle_z);
                worst_oracle_point = Some(key(&c.row));
            }
        }
    }
    rows.extend(checks.into_iter().map(|c| c.row));
    sort_rows(&mut rows);
    Ok(ValidationReport {
        rows,
        points: points.len(),
        max_phi_gap,
        worst_point,
        max_oracle_z,
        worst_oracle_point,
        tolerance: cfg.tolerance,
        z_limit: cfg.z_limit,
    })
}

/// Replays a trace file under every threshold pair, alongside model rows at
/// the trace's measured mean rate and frame size.
///
/// The load column holds the measured (scaled) load. Horizon defaults to the
/// last scaled timestamp.
pub fn cmd_trace(cfg: &ExperimentConfig, path: &Path) -> Result<Vec<ResultRow>, RunError> {
    cfg.validate()?;
    let file = std::fs::File::open(path).map_err(|e| {
        RunError::Trace(TraceError::Line {
            line: 0,
            kind: TraceErrorKind::Io(format!("{}: {e}", path.display())),
        })
    })?;
    let records = parse_trace(BufReader::new(file))?;
    let traffic = TrafficSpec::trace(records, cfg.rate_scale)?;
    let stats = traffic.trace_stats().expect("trace traffic has stats");
    let horizon = match cfg.horizon {
        Some(h) => h,
        None => match &traffic {
            TrafficSpec::Trace {
                records,
                rate_scale,
            } => records[records.len() - 1].timestamp * rate_scale,
            TrafficSpec::Poisson { .. } => unreachable!(),
        },
    };
    let load_gbps = stats.load_bps().unwrap_or(0.0) / 1e9;
    let seed = cfg.seeds[0];

    let points: Vec<Point> = cfg
        .thresholds
        .iter()
        .map(|&(qf, qd)| Point { load_gbps, qf, qd })
        .collect();
    let mut rows: Vec<ResultRow> = points
        .par_iter()
        .map(|p| {
            let r = run_checked(cfg, *p, &traffic, horizon, seed)?;
            let mut row = sim_row(*p, &[(seed, r)], horizon);
            row.seed = None;
            Ok(row)
        })
        .collect::<Result<_, RunError>>()?;
    if let Some(lambda) = stats.lambda() {
        for p in &points {
            rows.push(model_row_at(cfg, *p, lambda, stats.mean_frame_bytes())?);
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Mode;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            loads_gbps: vec![2.0],
            thresholds: vec![(1, 1)],
            horizon: Some(0.005),
            seeds: vec![1, 2],
            oracle_cycles: 20_000,
            ..Default::default()
        }
    }

    #[test]
    fn model_row_at_two_gbps() {
        let rows = cmd_sweep(&ExperimentConfig {
            mode: Mode::Model,
            ..small()
        })
        .unwrap();
        assert_eq!(rows.len(), 1);
        let phi = rows[0].phi.value().unwrap();
        assert!((phi - 0.6933).abs() < 1e-4, "{phi}");
        assert_eq!(rows[0].seed, None);
    }

    #[test]
    fn both_modes_agree_roughly() {
        let rows = cmd_sweep(&ExperimentConfig {
            horizon: Some(0.02),
            ..small()
        })
        .unwrap();
        assert_eq!(
            rows.iter().map(|r| r.mode).collect::<Vec<_>>(),
            vec![RowMode::Model, RowMode::Sim]
        );
        let gap = (rows[0].phi.value().unwrap() - rows[1].phi.value().unwrap()).abs();
        assert!(gap <= 0.015, "{gap}");
        assert!(rows[1].phi_ci.unwrap() >= 0.0);
        assert_eq!(rows[1].seed, Some(1));
    }

    #[test]
    fn full_load_is_marked_unstable() {
        let rows = cmd_sweep(&ExperimentConfig {
            loads_gbps: vec![40.0],
            ..small()
        })
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.is_unstable()));
    }

    #[test]
    fn oracle_mode_scores() {
        let checks = cmd_oracle(&small()).unwrap();
        assert_eq!(checks.len(), 1);
        assert!(checks[0].comparison.unwrap().within(4.0));
        assert_eq!(checks[0].row.mode, RowMode::Oracle);
    }

    #[test]
    fn validation_report_fields() {
        let rep = cmd_validate(&ExperimentConfig {
            horizon: Some(0.02),
            ..small()
        })
        .unwrap();
        assert_eq!(rep.points, 1);
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.worst_point, Some((2.0, 1, 1)));
        assert!(rep.summary().contains("points"));
    }
}
