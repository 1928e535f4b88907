//! CSV emission.
//!
//! Every table has a header row and a fixed column order. Reals are written in
//! plain decimal with 12 significant digits.

use std::fs;
use std::path::Path;

use crate::error::{Result, SimError};

/// A row of one CSV table.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

/// Plain decimal with 12 significant digits.
pub fn real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

pub fn to_csv_string<T: CsvRow>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(T::header())?;
    for row in rows {
        w.write_record(row.record())?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| SimError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn write_csv<T: CsvRow>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| SimError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let text = to_csv_string(rows)?;
    fs::write(path, text).map_err(|source| SimError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(real(0.0), "0");
        assert_eq!(real(1.0), "1.00000000000");
        assert_eq!(real(core::f64::consts::PI), "3.14159265359");
        assert_eq!(real(-1234.5678), "-1234.56780000");
        assert_eq!(real(1e9), "1000000000.00");
        assert_eq!(real(2.5e-7), "0.000000250000000000");
        assert_eq!(real(1.5e15), "1500000000000000");
    }

    struct Row(f64, bool);

    impl CsvRow for Row {
        fn header() -> &'static [&'static str] {
            &["x", "ok"]
        }
        fn record(&self) -> Vec<String> {
            vec![real(self.0), flag(self.1)]
        }
    }

    #[test]
    fn header_then_rows() {
        let s = to_csv_string(&[Row(0.5, true), Row(2.0, false)]).unwrap();
        assert_eq!(s, "x,ok\n0.500000000000,1\n2.00000000000,0\n");
    }
}
