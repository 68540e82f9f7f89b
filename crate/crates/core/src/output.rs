//! CSV and JSON writers.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::sweep::SweepCell;

pub const SWEEP_HEADER: &str = "param_a,param_b,lambda_p,rho_hat,std_error,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_HEADER.split(','))?;
    for c in cells {
        w.write_record([
            format_number(c.param_a),
            format_number(c.param_b),
            format_number(c.lambda_p),
            format_number(c.rho_hat),
            format_number(c.std_error),
            c.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with shortest round-trip number formatting.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")
}

/// Writes to `path`, or stdout when `None`.
pub fn with_output<F>(path: Option<&Path>, f: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(std::fs::File::create(p)?);
            f(&mut file)?;
            file.flush()
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()
        }
    }
}
