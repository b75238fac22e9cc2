//! CSV emission with a fixed column layout and 6-significant-digit
//! number formatting, so identical inputs produce identical bytes.

use crate::experiment::ResultRow;
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str =
    "method,loss,eps_r,eps_s,batch,repeats,ter_mean,ter_std,updates_mean,seconds";

/// Format with `sig` significant digits, in the spirit of printf `%g`:
/// plain decimal in a moderate exponent range, scientific outside it,
/// trailing zeros trimmed.
pub fn format_sig(x: f64, sig: usize) -> String {
    debug_assert!(sig >= 1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        let s = format!("{:.*e}", sig - 1, x);
        // trim trailing zeros in the mantissa ("1.50000e-5" -> "1.5e-5")
        match s.split_once('e') {
            Some((mantissa, exponent)) => {
                let mantissa = trim_decimal(mantissa);
                format!("{mantissa}e{exponent}")
            }
            None => s,
        }
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_decimal(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_decimal(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn push_row(out: &mut Vec<u8>, row: &ResultRow) {
    let line = format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        row.method,
        row.loss,
        format_sig(row.eps_r, 6),
        format_sig(row.eps_s, 6),
        row.batch,
        row.repeats,
        format_sig(row.ter_mean, 6),
        format_sig(row.ter_std, 6),
        format_sig(row.updates_mean, 6),
        format_sig(row.seconds, 6),
    );
    out.extend_from_slice(line.as_bytes());
}

/// Render the rows to the exact bytes `emit_csv` would write.
pub fn csv_bytes(rows: &[ResultRow]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CSV_HEADER.as_bytes());
    out.push(b'\n');
    for row in rows {
        push_row(&mut out, row);
    }
    out
}

/// Write the result table to `path` (UTF-8, `\n` terminators).
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&csv_bytes(rows))?;
    Ok(())
}
