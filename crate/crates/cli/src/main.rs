use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use eee_coalesce::cli::{Cli, Command, CommonArgs};
use eee_coalesce::report::write_rows;
use eee_coalesce::{cmd_oracle, cmd_sweep, cmd_trace, cmd_validate, ExperimentConfig, ResultRow};

fn emit(rows: &[ResultRow], cfg: &ExperimentConfig, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_rows(rows, cfg.format, BufWriter::new(f))?;
        }
        None => write_rows(rows, cfg.format, io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let resolve = |a: &CommonArgs| a.resolve().context("invalid configuration");
    match &cli.command {
        Command::Sweep(a) => {
            let cfg = resolve(a)?;
            emit(&cmd_sweep(&cfg)?, &cfg, a.out.as_deref())?;
            Ok(true)
        }
        Command::Validate(a) => {
            let cfg = resolve(a)?;
            let rep = cmd_validate(&cfg)?;
            emit(&rep.rows, &cfg, a.out.as_deref())?;
            eprintln!("{}", rep.summary());
            Ok(rep.passed())
        }
        Command::Trace { path, common } => {
            let cfg = resolve(common)?;
            let rows =
                cmd_trace(&cfg, path).with_context(|| format!("replaying {}", path.display()))?;
            emit(&rows, &cfg, common.out.as_deref())?;
            Ok(true)
        }
        Command::Oracle(a) => {
            let cfg = resolve(a)?;
            let checks = cmd_oracle(&cfg)?;
            let mut ok = true;
            let mut err = io::stderr().lock();
            for c in &checks {
                if let Some(cmp) = &c.comparison {
                    let pass = cmp.within(cfg.z_limit);
                    ok &= pass;
                    writeln!(
                        err,
                        "{} Gb/s Q_f={} Q_d={}: z(p_d)={:.3} z(E[T_f])={:.3} z(E[T_d])={:.3} {}",
                        c.row.load_gbps,
                        c.row.qf,
                        c.row.qd,
                        cmp.p_deep.z,
                        cmp.e_tf.z,
                        cmp.e_td.z,
                        if pass { "ok" } else { "OUT OF RANGE" }
                    )?;
                }
            }
            let rows: Vec<ResultRow> = checks.into_iter().map(|c| c.row).collect();
            emit(&rows, &cfg, a.out.as_deref())?;
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
