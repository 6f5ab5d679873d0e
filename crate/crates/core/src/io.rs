//! CSV plumbing and deterministic number formatting.
//!
//! Every numeric value written by this crate goes through [`fmt_sig`], which
//! renders 9 significant digits with trailing zeros trimmed. Identical
//! inputs therefore always produce byte-identical files.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("time column must be strictly increasing (line {line})")]
    NonMonotoneTime { line: usize },
    #[error("file is empty")]
    Empty,
}

/// Format with 9 significant digits, trailing zeros trimmed. `-0` collapses
/// to `0`; magnitudes outside [1e-4, 1e9) use scientific notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.8e}", x);
    let (_, exp) = sci.split_once('e').expect("exponent in scientific form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_decimal(format!("{:.*}", decimals, x))
    } else {
        let (mantissa, _) = sci.split_once('e').expect("mantissa");
        let mantissa = trim_decimal(mantissa.to_string());
        format!("{mantissa}e{exp}")
    }
}

fn trim_decimal(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// A parsed numeric CSV: header names plus rows of optional cells.
/// Empty cells and explicit `nan` parse as `None`.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: Vec<String>,
    /// (1-based source line, cells).
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<CsvTable, CsvError> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, line)) if line.trim().is_empty() => continue,
                Some((_, line)) => {
                    break line.split(',').map(|c| c.trim().to_string()).collect::<Vec<_>>()
                }
                None => return Err(CsvError::Empty),
            }
        };
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(CsvError::Malformed {
                    line: line_no,
                    message: format!(
                        "expected {} columns, found {}",
                        header.len(),
                        cells.len()
                    ),
                });
            }
            let mut parsed = Vec::with_capacity(cells.len());
            for cell in cells {
                let cell = cell.trim();
                if cell.is_empty() {
                    parsed.push(None);
                    continue;
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_nan() => parsed.push(None),
                    Ok(v) => parsed.push(Some(v)),
                    Err(_) => {
                        return Err(CsvError::Malformed {
                            line: line_no,
                            message: format!("cannot parse {cell:?} as a number"),
                        })
                    }
                }
            }
            rows.push((line_no, parsed));
        }
        Ok(CsvTable { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CsvError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn(name.to_string()))
    }

    /// The `time_s` column, which must be present, fully populated, and
    /// strictly increasing.
    pub fn times(&self) -> Result<Vec<f64>, CsvError> {
        let idx = self.column_index("time_s")?;
        let mut times = Vec::with_capacity(self.rows.len());
        let mut prev = f64::NEG_INFINITY;
        for (line, cells) in &self.rows {
            let t = cells[idx].ok_or(CsvError::Malformed {
                line: *line,
                message: "missing time value".to_string(),
            })?;
            if t <= prev {
                return Err(CsvError::NonMonotoneTime { line: *line });
            }
            prev = t;
            times.push(t);
        }
        Ok(times)
    }
}

/// Write one CSV line from already-formatted fields.
pub fn write_row(out: &mut String, fields: &[String]) {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(f);
    }
    out.push('\n');
}

/// Render a full CSV from a header and numeric rows.
pub fn render_csv(header: &[&str], rows: &[(f64, Vec<f64>)]) -> String {
    let mut out = String::new();
    write_row(&mut out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for (t, values) in rows {
        let mut fields = Vec::with_capacity(values.len() + 1);
        fields.push(fmt_sig(*t));
        for v in values {
            fields.push(fmt_sig(*v));
        }
        write_row(&mut out, &fields);
    }
    out
}

/// Render a labelled JSON-ish report deterministically via serde_json
/// pretty-printing (struct field order is fixed).
pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable report");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(5.0), "5");
        assert_eq!(fmt_sig(-0.5), "-0.5");
        assert_eq!(fmt_sig(76.2), "76.2");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(123456789.0), "123456789");
        assert_eq!(fmt_sig(1234567891.0), "1.23456789e9");
        assert_eq!(fmt_sig(0.000123456789), "0.000123456789");
        assert_eq!(fmt_sig(0.0000123456789), "1.23456789e-5");
        assert_eq!(fmt_sig(2.5e-10), "2.5e-10");
    }

    #[test]
    fn csv_round_trip() {
        let text = render_csv(
            &["time_s", "a", "b"],
            &[(0.0, vec![1.0, 2.0]), (0.1, vec![-3.5, 4.25])],
        );
        let table = CsvTable::parse(&text).unwrap();
        assert_eq!(table.header, vec!["time_s", "a", "b"]);
        assert_eq!(table.times().unwrap(), vec![0.0, 0.1]);
        assert_eq!(table.rows[1].1[1], Some(-3.5));
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(CsvTable::parse(""), Err(CsvError::Empty)));
        let bad = "time_s,a\n0.0,1.0\n0.1,zebra\n";
        match CsvTable::parse(bad) {
            Err(CsvError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed error, got {other:?}"),
        }
        let bad_cols = "time_s,a\n0.0,1.0,2.0\n";
        assert!(matches!(
            CsvTable::parse(bad_cols),
            Err(CsvError::Malformed { line: 2, .. })
        ));
        let shuffled = "time_s,a\n0.2,1.0\n0.1,2.0\n";
        let table = CsvTable::parse(shuffled).unwrap();
        assert!(matches!(
            table.times(),
            Err(CsvError::NonMonotoneTime { line: 3 })
        ));
    }

    #[test]
    fn nan_and_empty_cells_are_none() {
        let text = "time_s,a\n0.0,nan\n0.1,\n0.2,7\n";
        let table = CsvTable::parse(text).unwrap();
        assert_eq!(table.rows[0].1[1], None);
        assert_eq!(table.rows[1].1[1], None);
        assert_eq!(table.rows[2].1[1], Some(7.0));
    }
}
