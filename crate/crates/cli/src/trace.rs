//! CSV trace format.
//!
//! One row per control step, rates in rad/s. Floats are written with Rust's
//! shortest round-trip scientific formatting, so reading a trace back gives
//! the logged values bit for bit. Columns that only the MPC fills are left
//! empty for B-dot runs.

use std::io::{Read, Write};

use detumble_core::sim::SimulationRecord;

use crate::CliError;

pub const HEADER: [&str; 18] = [
    "t", "wx", "wy", "wz", "q0", "q1", "q2", "q3", "bx", "by", "bz", "mx", "v", "rho0", "f_norm", "lyap", "cond",
    "clamped",
];

fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn row(r: &SimulationRecord) -> Vec<String> {
    let mut out = Vec::with_capacity(HEADER.len());
    out.push(sci(r.t));
    out.extend(r.omega.iter().map(|x| sci(*x)));
    out.extend(r.attitude.iter().map(|x| sci(*x)));
    out.extend(r.b_body.iter().map(|x| sci(*x)));
    out.push(sci(r.command.x));
    match &r.mpc {
        Some(m) => {
            out.push(sci(m.v));
            out.push(sci(m.rho0));
            out.push(sci(m.residual_norm));
            out.push(sci(r.lyapunov));
            out.push(m.condition.to_string());
            out.push(u8::from(m.clamped).to_string());
        }
        None => {
            out.extend(["", "", ""].map(String::from));
            out.push(sci(r.lyapunov));
            out.extend(["", ""].map(String::from));
        }
    }
    out
}

pub fn write_trace<W: Write>(out: W, records: &[SimulationRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(row(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// A trace read back from disk, column-major. Empty cells become `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl Trace {
    pub fn read<R: Read>(input: R) -> Result<Trace, CliError> {
        let mut rdr = csv::Reader::from_reader(input);
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut values = vec![Vec::new(); columns.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (col, cell) in values.iter_mut().zip(rec.iter()) {
                let cell = cell.trim();
                let parsed = if cell.is_empty() {
                    None
                } else {
                    Some(
                        cell.parse::<f64>()
                            .map_err(|_| CliError::Trace(format!("row {}: `{cell}` is not a number", line + 2)))?,
                    )
                };
                col.push(parsed);
            }
        }
        Ok(Trace { columns, values })
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>], CliError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.values[i].as_slice())
            .ok_or_else(|| CliError::Trace(format!("trace has no `{name}` column")))
    }
}
