//! Trajectory CSV: header `k,x1,...,xn`, values with 17 significant digits.

use std::io::{Read, Write};

use lipset_core::{LipsetError, Result};

fn csv_err(e: csv::Error) -> LipsetError {
    LipsetError::InvalidInput(format!("csv: {e}"))
}

/// Round-trip exact decimal form (17 significant digits).
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory_csv<W: Write>(out: W, trajectory: &[Vec<f64>]) -> Result<()> {
    let n = trajectory.first().map(Vec::len).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("k".to_string()).chain((1..=n).map(|i| format!("x{i}"))).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (k, x) in trajectory.iter().enumerate() {
        let row: Vec<String> = std::iter::once(k.to_string()).chain(x.iter().map(|v| format_f64(*v))).collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("k") {
        return Err(LipsetError::InvalidInput("trajectory csv must start with column k".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| LipsetError::InvalidInput(format!("csv value {s:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}
