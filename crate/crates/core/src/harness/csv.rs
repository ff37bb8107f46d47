//! CSV output. Reals use C `%.10g` formatting, so files are byte-stable
//! across platforms and locales.

use std::cmp::Ordering;
use std::path::Path;

use crate::error::{Error, Result};

use super::experiment::BerRecord;

pub const CSV_HEADER: &str =
    "detector,snr_db,bit_errors,bits_total,ber,mean_iters,mean_residual_final,certificate_failures";

/// `%.10g`: ten significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e10)`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..10).contains(&exp) {
        let fixed = format!("{:.*}", (9 - exp) as usize, x);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn record_order(a: &BerRecord, b: &BerRecord) -> Ordering {
    a.detector.cmp(&b.detector).then(a.snr_db.total_cmp(&b.snr_db))
}

/// One CSV row without line ending.
pub fn format_row(r: &BerRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.detector,
        format_real(r.snr_db),
        r.bit_errors,
        r.bits_total,
        format_real(r.ber),
        format_real(r.mean_iters),
        format_real(r.mean_residual_final),
        r.certificate_failures
    )
}

/// Header plus rows sorted by `(detector, snr_db)`.
pub fn records_to_csv(records: &[BerRecord]) -> String {
    let mut sorted: Vec<&BerRecord> = records.iter().collect();
    sorted.sort_by(|a, b| record_order(a, b));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format_row(r));
        out.push('\n');
    }
    out
}

pub fn emit_csv(records: &[BerRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, records_to_csv(records)).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(line: usize, name: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {name} `{value}`")))
}

/// Parses a file written by [`emit_csv`]. `failures` is not stored in the
/// CSV and comes back as 0.
pub fn parse_csv(text: &str) -> Result<Vec<BerRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        _ => return Err(Error::Parse("line 1: missing or unexpected header".to_string())),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let n = i + 1;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(Error::Parse(format!("line {n}: expected 8 fields, found {}", cols.len())));
            }
            Ok(BerRecord {
                detector: cols[0].to_string(),
                snr_db: field(n, "snr_db", cols[1])?,
                bit_errors: field(n, "bit_errors", cols[2])?,
                bits_total: field(n, "bits_total", cols[3])?,
                ber: field(n, "ber", cols[4])?,
                mean_iters: field(n, "mean_iters", cols[5])?,
                mean_residual_final: field(n, "mean_residual_final", cols[6])?,
                certificate_failures: field(n, "certificate_failures", cols[7])?,
                failures: 0,
            })
        })
        .collect()
}
