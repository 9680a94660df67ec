//! Deterministic JSON and CSV writers. Floats are rounded to 12 significant
//! digits and printed in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// `x` rounded to 12 significant digits. Non-finite values pass through.
pub fn r12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Rounds every element.
pub fn r12v(xs: &[f64]) -> Vec<f64> {
    xs.iter().copied().map(r12).collect()
}

pub fn r12p((a, b): (f64, f64)) -> [f64; 2] {
    [r12(a), r12(b)]
}

/// A float as written to CSV: the JSON text of the rounded value, empty for
/// non-finite values.
pub fn float_cell(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&r12(x)).unwrap_or_default()
    } else {
        String::new()
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
        path: dir.join(name).display().to_string(),
        source: std::io::Error::other(e),
    })?;
    text.push('\n');
    write_file(dir, name, &text)
}

/// CSV text from a header and rows of preformatted cells.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(r12(0.1 + 0.2), 0.3);
        assert_eq!(r12(4.21431234567891), 4.21431234568);
        assert_eq!(r12(-1.0e-20 / 3.0), -3.33333333333e-21);
        assert!(r12(f64::INFINITY).is_infinite());
        assert_eq!(float_cell(2.0), "2.0");
        assert_eq!(float_cell(f64::NAN), "");
    }
}
