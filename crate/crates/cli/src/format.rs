//! Number formatting and seed lists.

use std::path::Path;

use crate::error::{CliError, CliResult};

/// Shortest decimal that round-trips the value rounded to 9 significant
/// digits. Empty for missing values.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("float formatting parses");
    let s = rounded.to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub fn opt9(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

/// `7`, `0..9` (inclusive), `0..=9`, `0..<10` or a comma list of those.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
        if let Some((a, b)) = part.split_once("..") {
            let a = num(a)?;
            let (b, inclusive) = if let Some(b) = b.strip_prefix('=') {
                (num(b)?, true)
            } else if let Some(b) = b.strip_prefix('<') {
                (num(b)?, false)
            } else {
                (num(b)?, true)
            };
            let end = if inclusive { b.checked_add(1).ok_or("seed range overflows")? } else { b };
            if end <= a {
                return Err(format!("empty seed range {part:?}"));
            }
            if end - a > 1_000_000 {
                return Err(format!("seed range {part:?} is too large"));
            }
            out.extend(a..end);
        } else {
            out.push(num(part)?);
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(out)
}

pub struct CsvTable {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        crate::error::write_file(path, self.to_bytes())
    }
}

/// Reads a `subject,factor1,factor2,value` file.
pub fn read_long_csv(path: &Path) -> CliResult<Vec<(String, String, String, f64)>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::read(path, e))?;
    let headers = r.headers().map_err(|e| CliError::read(path, e))?.clone();
    let want = ["subject", "factor1", "factor2", "value"];
    if headers.len() != 4 || headers.iter().zip(want).any(|(h, w)| !h.eq_ignore_ascii_case(w)) {
        return Err(CliError::read(path, format!("expected header {}, got {}", want.join(","), headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::read(path, e))?;
        let line = i + 2;
        let value: f64 = rec[3]
            .parse()
            .map_err(|_| CliError::read(path, format!("line {line}: value {:?} is not a number", &rec[3])))?;
        if !value.is_finite() {
            return Err(CliError::read(path, format!("line {line}: non-finite value")));
        }
        rows.push((rec[0].to_string(), rec[1].to_string(), rec[2].to_string(), value));
    }
    if rows.is_empty() {
        return Err(CliError::read(path, "no data rows"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.049), "0.049");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(123456789.87), "123456790");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(2.0), "2");
        assert_eq!(opt9(None), "");
    }

    proptest! {
        #[test]
        fn sig9_is_within_half_an_ulp_of_nine_digits(x in -1e6f64..1e6) {
            let y: f64 = sig9(x).parse().unwrap();
            prop_assert!((y - x).abs() <= x.abs() * 5e-9 + f64::MIN_POSITIVE);
            prop_assert_eq!(sig9(y), sig9(x));
        }
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..9").unwrap().len(), 10);
        assert_eq!(parse_seeds("0..=9").unwrap(), parse_seeds("0..9").unwrap());
        assert_eq!(parse_seeds("0..<3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 2,8..9").unwrap(), vec![4, 2, 8, 9]);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn csv_quotes_per_rfc4180() {
        let mut t = CsvTable::new(vec!["a", "b"]);
        t.rows.push(vec!["x,y".into(), "say \"hi\"".into()]);
        assert_eq!(String::from_utf8(t.to_bytes()).unwrap(), "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n");
    }
}
