//! Comma-separated tables with a header row. Numbers are written at nine
//! significant digits.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Nine significant digits, plain notation for moderate magnitudes and
/// exponent notation outside `[1e-5, 1e15)`. Integers carry no fraction.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..15).contains(&exp) {
        let m = trim_fraction(mantissa);
        return format!("{m}e{exp}");
    }
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (8 - exp).max(0) as usize;
    trim_fraction(&format!("{rounded:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn get<'a>(&'a self, row: &'a [String], name: &str) -> Result<&'a str> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::Config(format!("table has no column `{name}`")))?;
        Ok(&row[i])
    }

    pub fn get_f64(&self, row: &[String], name: &str) -> Result<f64> {
        parse_f64(self.get(row, name)?, name)
    }

    pub fn get_opt_f64(&self, row: &[String], name: &str) -> Result<Option<f64>> {
        let s = self.get(row, name)?;
        if s.is_empty() {
            Ok(None)
        } else {
            parse_f64(s, name).map(Some)
        }
    }

    pub fn get_usize(&self, row: &[String], name: &str) -> Result<usize> {
        let s = self.get(row, name)?;
        s.parse()
            .map_err(|_| Error::Config(format!("column `{name}`: `{s}` is not a count")))
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, csv::Error> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::input(path, e))?;
        Self::parse(&text).map_err(|e| Error::input(path, e))
    }
}

fn parse_f64(s: &str, name: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Config(format!("column `{name}`: `{s}` is not a number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(100.0494), "100.0494");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(2_000_000.0), "2000000");
        assert_eq!(fmt_num(123_456_789_012.0), "123456789000");
        assert_eq!(fmt_num(-0.000123456789123), "-0.000123456789");
        assert_eq!(fmt_num(1.5e-9), "1.5e-9");
        assert_eq!(fmt_num(9.9999999999), "10");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        t.push(vec!["".into(), "z".into()]);
        let back = Table::parse(&t.to_csv_string()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get_opt_f64(&back.rows[1], "a").unwrap(), None);
    }
}
