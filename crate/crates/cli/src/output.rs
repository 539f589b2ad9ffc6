//! CSV and metadata emission. All floats go through the library's fixed
//! 16-digit formatter so reruns with the same seed are bitwise identical.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use pxp_core::experiments::{fmt_float, ScanResult, Trajectory};

use crate::{CliError, CliResult};

pub fn csv_path(base: &Path) -> PathBuf {
    PathBuf::from(format!("{}.csv", base.display()))
}

pub fn meta_path(base: &Path) -> PathBuf {
    PathBuf::from(format!("{}.meta.json", base.display()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let f = File::create(path)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// One or more labeled trajectories stacked in a single table.
pub fn write_trajectory_series<W: Write>(
    out: &mut W,
    series: &[(String, Trajectory)],
) -> io::Result<()> {
    writeln!(out, "series,m,M,F")?;
    for (label, traj) in series {
        for (m, (mag, fid)) in traj.magnetization.iter().zip(&traj.fidelity).enumerate() {
            writeln!(out, "{label},{m},{},{}", fmt_float(*mag), fmt_float(*fid))?;
        }
    }
    Ok(())
}

/// One or more labeled scans stacked in a single table. Cells that failed
/// carry NaN in the metric column; the axes and seed still identify them.
pub fn write_scan_series<W: Write>(out: &mut W, series: &[(String, ScanResult)]) -> io::Result<()> {
    writeln!(out, "series,axis1,axis2,metric,censored,seed")?;
    for (label, scan) in series {
        for cell in &scan.cells {
            writeln!(
                out,
                "{label},{},{},{},{},{}",
                fmt_float(cell.axis1),
                fmt_float(cell.axis2),
                fmt_float(cell.value),
                cell.censored,
                cell.seed
            )?;
        }
    }
    Ok(())
}

pub fn emit_trajectories(
    base: &Path,
    series: &[(String, Trajectory)],
    meta: &serde_json::Value,
) -> CliResult<()> {
    let path = csv_path(base);
    let mut w = create(&path)?;
    write_trajectory_series(&mut w, series)
        .and_then(|()| w.flush())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    emit_meta(base, meta)
}

pub fn emit_scans(
    base: &Path,
    series: &[(String, ScanResult)],
    meta: &serde_json::Value,
) -> CliResult<()> {
    let path = csv_path(base);
    let mut w = create(&path)?;
    write_scan_series(&mut w, series)
        .and_then(|()| w.flush())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    emit_meta(base, meta)
}

/// Reproducibility sidecar. serde_json orders object keys, and nothing here
/// depends on time of day, so the sidecar is as reproducible as the CSV.
pub fn emit_meta(base: &Path, meta: &serde_json::Value) -> CliResult<()> {
    let path = meta_path(base);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, meta)
        .map_err(|e| CliError::runtime(format!("cannot encode {}: {e}", path.display())))?;
    w.write_all(b"\n")
        .and_then(|()| w.flush())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn library_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}
