//! CSV tables and JSON summaries.
//!
//! Floats are written with 17 significant digits so values round-trip.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{MonitorKind, StepRecord};
use crate::error::{Error, Result};
use crate::experiment::{ConvergenceTable, RunResult, SweepResult};

pub const RUN_CSV_HEADER: &str = "step,time,energy,l1_norm,min_val,max_val,maxprin_active,maxprin_ok,l1_active,l1_ok,energy_active,energy_ok";
pub const SWEEP_CSV_HEADER: &str =
    "dt,within_bound,first_bound_violation_step,first_energy_increase_step,final_energy";
pub const CONVERGENCE_CSV_HEADER: &str = "dt,dx,h,error,observed_order";

pub const RUN_CSV: &str = "run.csv";
pub const RUN_SUMMARY: &str = "summary.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_SUMMARY: &str = "sweep_summary.json";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const CONVERGENCE_SUMMARY: &str = "convergence_summary.json";

/// 17 significant digits.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_step(v: Option<u64>) -> String {
    v.map_or_else(|| "none".to_string(), |s| s.to_string())
}

pub fn write_run_csv<W: Write>(mut w: W, records: &[StepRecord]) -> io::Result<()> {
    writeln!(w, "{RUN_CSV_HEADER}")?;
    for r in records {
        let m = |k| r.monitor(k);
        let (mp, l1, en) = (
            m(MonitorKind::MaxPrinciple),
            m(MonitorKind::L1Bound),
            m(MonitorKind::EnergyDecay),
        );
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            float(r.time),
            float(r.energy),
            float(r.l1_norm),
            float(r.min_val),
            float(r.max_val),
            mp.active,
            mp.satisfied,
            l1.active,
            l1.satisfied,
            en.active,
            en.satisfied,
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult) -> io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for row in &sweep.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            float(row.dt),
            row.within_bound,
            opt_step(row.first_bound_violation_step),
            opt_step(row.first_energy_increase_step),
            float(row.final_energy),
        )?;
    }
    Ok(())
}

pub fn write_convergence_csv<W: Write>(mut w: W, table: &ConvergenceTable) -> io::Result<()> {
    writeln!(w, "{CONVERGENCE_CSV_HEADER}")?;
    for row in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            float(row.dt),
            float(row.dx),
            float(row.h),
            float(row.error),
            row.observed_order.map_or_else(|| "none".to_string(), float),
        )?;
    }
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
        writeln!(w)
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes `run.csv` and `summary.json`; returns their paths.
pub fn write_run(dir: &Path, result: &RunResult) -> Result<(PathBuf, PathBuf)> {
    ensure_dir(dir)?;
    let csv = dir.join(RUN_CSV);
    let json = dir.join(RUN_SUMMARY);
    write_file(&csv, |w| write_run_csv(w, &result.records))?;
    write_json(&json, &result.summary)?;
    Ok((csv, json))
}

pub fn write_sweep(dir: &Path, sweep: &SweepResult) -> Result<(PathBuf, PathBuf)> {
    ensure_dir(dir)?;
    let csv = dir.join(SWEEP_CSV);
    let json = dir.join(SWEEP_SUMMARY);
    write_file(&csv, |w| write_sweep_csv(w, sweep))?;
    write_json(&json, sweep)?;
    Ok((csv, json))
}

pub fn write_convergence(dir: &Path, table: &ConvergenceTable) -> Result<(PathBuf, PathBuf)> {
    ensure_dir(dir)?;
    let csv = dir.join(CONVERGENCE_CSV);
    let json = dir.join(CONVERGENCE_SUMMARY);
    write_file(&csv, |w| write_convergence_csv(w, table))?;
    write_json(&json, table)?;
    Ok((csv, json))
}
