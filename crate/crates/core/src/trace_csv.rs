//! CSV layout of a trace: a fixed header, one row per step, every value in
//! scientific notation with 17 significant digits (exact `f64` round trip).

use std::io::{Read, Write};

use thiserror::Error;

use crate::sim::TraceRecord;

pub const HEADER: [&str; 19] = [
    "t", "x_p", "V_o", "P", "Q", "v_ref", "q_ref", "R_l_true", "R_l_est", "a_hat", "u_p", "u_q", "e_v",
    "e_s", "e_q_err", "V2", "V4", "w1", "g",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("row {row}, column `{column}`: cannot parse `{text}`")]
    Value { row: usize, column: &'static str, text: String },
}

fn fields(r: &TraceRecord) -> [f64; 19] {
    [
        r.t, r.x_p, r.v_o, r.p, r.q, r.v_ref, r.q_ref, r.r_l_true, r.r_l_est, r.a_hat, r.u_p, r.u_q, r.e_v,
        r.e_s, r.e_q_err, r.v2, r.v4, r.w1, r.g,
    ]
}

fn from_fields(v: [f64; 19]) -> TraceRecord {
    let [t, x_p, v_o, p, q, v_ref, q_ref, r_l_true, r_l_est, a_hat, u_p, u_q, e_v, e_s, e_q_err, v2, v4, w1, g] = v;
    TraceRecord { t, x_p, v_o, p, q, v_ref, q_ref, r_l_true, r_l_est, a_hat, u_p, u_q, e_v, e_s, e_q_err, v2, v4, w1, g }
}

pub fn write_trace<W: Write>(out: W, records: &[TraceRecord]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(HEADER.len());
    for r in records {
        row.clear();
        row.extend(fields(r).iter().map(|v| format!("{v:.16e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>, CsvError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(CsvError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let mut values = [0.0; 19];
        for (i, slot) in values.iter_mut().enumerate() {
            let text = rec.get(i).unwrap_or("");
            *slot = text.trim().parse().map_err(|_| CsvError::Value {
                row: row + 1,
                column: HEADER[i],
                text: text.to_string(),
            })?;
        }
        records.push(from_fields(values));
    }
    Ok(records)
}
