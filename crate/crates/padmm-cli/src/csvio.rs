//! Atomic output writing. Every artifact is first written to a temporary
//! file in the destination directory and then renamed into place, so a
//! partially written CSV or JSON report is never observable under its final
//! name. Floats are printed with 17 significant digits, enough to round-trip
//! `f64` exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Formats a float with 17 significant digits (round-trip safe).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Formats an optional float; absent values become an empty CSV cell.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn temp_path(path: &Path) -> std::path::PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| std::ffi::OsString::from("out"));
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes a CSV file atomically: comma-delimited, UTF-8, one header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let tmp = temp_path(path);
    {
        let mut w = csv::Writer::from_path(&tmp)
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        w.write_record(header)
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row)
                .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes `value` as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let tmp = temp_path(path);
    {
        let mut f = fs::File::create(&tmp)?;
        let body = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        f.write_all(&body)?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
