//! CSV output and plot series.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{series, Aggregate, CellResult, TrialRecord};
use crate::error::{Error, Result};
use crate::solver::SolveStatus;

pub const CSV_HEADER: &str =
    "scenario_id,seed,snr_db,gamma_privacy_bps,scheme,mode,rate_per_ue_bps,secrecy_rate_per_ue_bps,w_p1_hz,w_p2_hz,w_s_hz,iterations,status";

fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        // the serializer only emits a header together with the first row
        fs::write(path, format!("{CSV_HEADER}\n"))?;
        return Ok(());
    }
    write_rows(records, path)
}

pub fn read_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Config(format!("{}: unexpected CSV header `{header}`", path.display())));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_aggregates(aggs: &[Aggregate], path: &Path) -> Result<()> {
    write_rows(aggs, path)
}

#[derive(Serialize)]
struct TraceRow<'a> {
    scenario_id: &'a str,
    scheme: &'a str,
    mode: &'a str,
    iter: usize,
    objective_bps: f64,
    worst_residual: f64,
    subproblem_status: SolveStatus,
}

/// One line per CCCP iteration of every solved cell.
pub fn write_traces(cells: &[CellResult], path: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for c in cells {
        let Some(sol) = &c.solution else { continue };
        for it in &sol.iterations {
            rows.push(TraceRow {
                scenario_id: &c.record.scenario_id,
                scheme: sol.scheme.as_str(),
                mode: sol.mode.as_str(),
                iter: it.iter,
                objective_bps: it.objective,
                worst_residual: it.worst_residual,
                subproblem_status: it.status,
            });
        }
    }
    write_rows(&rows, path)
}

#[derive(Serialize)]
struct SeriesRow {
    gamma_privacy_bps: f64,
    secrecy_rate_bps: f64,
    rate_per_ue_bps: f64,
    private_fraction_1: f64,
    private_fraction_2: f64,
    shared_fraction: f64,
}

/// One file per `(snr, scheme, mode)`, rows by increasing threshold:
/// mean secrecy rate against mean per-UE rate and mean bandwidth fractions.
/// Returns the written paths.
pub fn emit_plot_data(aggs: &[Aggregate], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut keys = Vec::new();
    for a in aggs {
        let k = (a.snr_db.to_bits(), a.scheme, a.mode);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut paths = Vec::new();
    for (snr_bits, scheme, mode) in keys {
        let snr = f64::from_bits(snr_bits);
        let rows: Vec<SeriesRow> = series(aggs, snr, scheme, mode)
            .into_iter()
            .map(|a| SeriesRow {
                gamma_privacy_bps: a.gamma_privacy_bps,
                secrecy_rate_bps: a.mean_secrecy_rate_per_ue_bps,
                rate_per_ue_bps: a.mean_rate_per_ue_bps,
                private_fraction_1: a.mean_private_fraction_1,
                private_fraction_2: a.mean_private_fraction_2,
                shared_fraction: a.mean_shared_fraction,
            })
            .collect();
        let path = dir.join(format!("series_snr{snr}_{}_{}.csv", scheme.as_str(), mode.as_str()));
        write_rows(&rows, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
