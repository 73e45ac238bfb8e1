//! Per-iteration residual records.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::Instant;

/// Rows of `(k, values...)` under fixed column names, with the wall-clock
/// offset of each record kept separately so CSV output stays byte-stable.
#[derive(Clone, Debug)]
pub struct ResidualTrace {
    columns: Vec<String>,
    rows: Vec<(usize, Vec<f64>)>,
    elapsed: Vec<f64>,
    start: Instant,
}

impl ResidualTrace {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        ResidualTrace {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
            elapsed: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn record(&mut self, k: usize, values: &[f64]) {
        assert_eq!(values.len(), self.columns.len(), "trace row width");
        self.rows.push((k, values.to_vec()));
        self.elapsed.push(self.start.elapsed().as_secs_f64());
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn last(&self) -> Option<(usize, &[f64])> {
        self.rows.last().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Seconds since the trace was created, one entry per record.
    pub fn elapsed(&self) -> &[f64] {
        &self.elapsed
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|(_, v)| v[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k");
        for c in &self.columns {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (k, v) in &self.rows {
            write!(s, "{k}").unwrap();
            for x in v {
                write!(s, ",{x:?}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        out.write_all(self.to_csv().as_bytes())
    }
}
