//! Numeric CSV tables: header row, LF endings, shortest round-trip decimals.

use std::path::Path;

use crate::error::{Error, Result};

/// A header and rows of numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Shortest decimal that parses back to the same `f64`; integers print
/// without a fractional part.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        // no negative zero in files
        return "0".to_owned();
    }
    format!("{x}")
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|&x| format_number(x))).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Parses a table; `file` is only used in error messages.
    pub fn parse(bytes: &[u8], file: &Path) -> Result<Self> {
        let perr = |line: u64, msg: String| Error::Parse {
            file: file.to_path_buf(),
            line: line as usize,
            msg,
        };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let header: Vec<String> = r
            .headers()
            .map_err(|e| perr(1, e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(perr(1, "missing header row".into()));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                perr(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let row = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| perr(line, format!("`{f}` is not a number")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read(path)?, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_integers_and_reals() {
        assert_eq!(format_number(12.0), "12");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(1.0 / 3.0), "0.3333333333333333");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bytes = b"t,S\n0,1\n1,x\n";
        match Table::parse(bytes, Path::new("h.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ragged = b"t,S\n0,1\n1,2,3\n";
        assert!(matches!(Table::parse(ragged, Path::new("h.csv")), Err(Error::Parse { line: 3, .. })));
    }

    proptest! {
        #[test]
        fn round_trip_is_byte_stable(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 0..20)) {
            let mut t = Table::new(vec!["t".into(), "S".into(), "I".into()]);
            rows.into_iter().for_each(|r| t.push(r));
            let bytes = t.to_bytes();
            let back = Table::parse(&bytes, Path::new("x")).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
            for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
                prop_assert!(a == b || (*a == 0.0 && *b == 0.0));
            }
        }
    }
}
