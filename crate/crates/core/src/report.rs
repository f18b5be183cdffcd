//! CSV tables with enough digits to re-parse every value bit for bit.

use std::io::{Read, Write};

use num_complex::Complex64 as C;

use crate::asymptotics::AsymptoticModel;
use crate::error::{invalid, Error, Result};
use crate::scattering::FullCoefficients;
use crate::solver::FieldSolution;

pub const SWEEP_HEADER: [&str; 8] = ["L", "ReR", "ImR", "ReT", "ImT", "absR", "absT", "energy_residual"];
pub const ASY_HEADER: [&str; 9] = [
    "L",
    "Re_r_asy",
    "Im_r_asy",
    "Re_R_asy",
    "Im_R_asy",
    "Re_R_asy_full",
    "Im_R_asy_full",
    "Re_T_asy_full",
    "Im_T_asy_full",
];
pub const FIELD_HEADER: [&str; 4] = ["x", "y", "Re", "Im"];

/// 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn io(e: impl std::fmt::Display) -> Error {
    invalid(format!("i/o: {e}"))
}

/// Writes a header and numeric rows.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(io)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(invalid("row length does not match the header"));
        }
        w.write_record(row.iter().map(|&v| format_value(v))).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// Reads a table written by [`write_table`].
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io)?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        rows.push(rec.iter().map(|s| s.parse::<f64>().map_err(io)).collect::<Result<Vec<f64>>>()?);
    }
    Ok((header, rows))
}

pub fn sweep_row(l: f64, c: &FullCoefficients) -> Vec<f64> {
    let (r, t) = (c.reflection, c.transmission);
    vec![l, r.re, r.im, t.re, t.im, r.norm(), t.norm(), c.energy_residual]
}

pub fn asy_row(model: &AsymptoticModel, l: f64) -> Result<Vec<f64>> {
    let r = model.r_asy(l)?;
    let m = model.mixed_asy(l)?;
    let (big_r, big_t) = model.rt_asy(l)?;
    Ok(vec![l, r.re, r.im, m.re, m.im, big_r.re, big_r.im, big_t.re, big_t.im])
}

/// Nodal field ordered by rows of constant `y`.
pub fn field_rows(sol: &FieldSolution) -> Vec<Vec<f64>> {
    sol.nodal_field().into_iter().map(|(p, v): ([f64; 2], C)| vec![p[0], p[1], v.re, v.im]).collect()
}
