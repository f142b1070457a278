//! CSV encoding of sweep rows.
//!
//! Columns are fixed: see [`COLUMNS`]. Reals are written with 17
//! significant digits in scientific notation, which round-trips every `f64`
//! exactly, and an always-transmit threshold is written as `-inf`.

use std::io::{Read, Write};

use crate::channel::Threshold;
use crate::error::{Error, Result};
use crate::experiments::sweep::SweepRow;

pub const COLUMNS: [&str; 9] =
    ["sweep_value", "n_star", "t_star", "tau_star", "tau_ref", "reduction", "reduction_fraction", "n_hat", "t_hat"];

const NEG_INF: &str = "-inf";

pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_threshold(t: Threshold) -> String {
    match t {
        Threshold::Finite(v) => format_real(v),
        Threshold::NegInfinity => NEG_INF.to_string(),
    }
}

fn record(row: &SweepRow) -> [String; 9] {
    [
        format_real(row.sweep_value),
        row.n_star.to_string(),
        format_threshold(row.t_star),
        format_real(row.tau_star),
        format_real(row.tau_ref),
        format_real(row.reduction),
        format_real(row.reduction_fraction),
        format_real(row.n_hat),
        format_real(row.t_hat),
    ]
}

pub fn write_rows<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(Error::Config(format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let real = |col: usize| -> Result<f64> {
            rec[col].parse::<f64>().map_err(|e| Error::Config(format!("line {line}, column {}: {e}", COLUMNS[col])))
        };
        let t_star = if &rec[2] == NEG_INF { Threshold::NegInfinity } else { Threshold::Finite(real(2)?) };
        rows.push(SweepRow {
            sweep_value: real(0)?,
            n_star: rec[1].parse().map_err(|e| Error::Config(format!("line {line}, column n_star: {e}")))?,
            t_star,
            tau_star: real(3)?,
            tau_ref: real(4)?,
            reduction: real(5)?,
            reduction_fraction: real(6)?,
            n_hat: real(7)?,
            t_hat: real(8)?,
        });
    }
    Ok(rows)
}
