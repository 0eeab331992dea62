//! CSV output with a fixed, reproducible number format.

use std::path::Path;

use super::SweepResult;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "sweep_value,scheme,snr_db,mean_rate,std_rate,n_real,mean_iters,mean_wall_ms";

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros removed,
/// exponent notation outside `1e-4 <= |x| < 1e9`.
pub fn format_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // the exponent after rounding to DIGITS significant digits
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= DIGITS {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_csv(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            format_g9(r.sweep_value),
            r.scheme.name(),
            format_g9(r.snr_db),
            format_g9(r.mean_rate),
            format_g9(r.std_rate),
            r.n_realizations,
            format_g9(r.mean_iterations),
            format_g9(r.mean_wall_ms),
        ));
    }
    out
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, format_csv(result)).map_err(|e| Error::io(path, e))
}
