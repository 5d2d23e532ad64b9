//! CSV emission. Every table has a header row; missing values are `NA`.

use std::fs;
use std::path::Path;

use crate::error::Result;

pub const MISSING: &str = "NA";

/// Shortest round-trip representation, so identical runs give identical bytes.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        MISSING.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), fmt_f64)
}

/// Snapshot-time tag for file names, e.g. `0.25` -> `t0.250000`.
pub fn time_tag(t: f64) -> String {
    format!("t{t:.6}")
}

/// Writes `rows` under `header` to `path`, creating parent directories.
/// The table is written to a sibling temporary file first and renamed into place.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("csv.part");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
