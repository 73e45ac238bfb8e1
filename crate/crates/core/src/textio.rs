//! Whitespace-separated numeric text: blank lines and `#` comments are skipped,
//! errors carry 1-based line numbers.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub(crate) struct Reader<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = l.split_whitespace().collect();
                (!toks.is_empty()).then_some((i + 1, toks))
            })
            .collect();
        Reader { lines, pos: 0 }
    }

    fn eof_line(&self) -> usize {
        self.lines.last().map_or(1, |(n, _)| n + 1)
    }

    pub(crate) fn next_tokens(&mut self) -> Result<(usize, Vec<&'a str>)> {
        let line = self.lines.get(self.pos).cloned().ok_or_else(|| Error::Parse {
            line: self.eof_line(),
            message: "unexpected end of input".into(),
        })?;
        self.pos += 1;
        Ok(line)
    }

    /// A header row: a keyword followed by `count` unsigned integers.
    pub(crate) fn header(&mut self, keyword: Option<&str>, count: usize) -> Result<Vec<u64>> {
        let (line, toks) = self.next_tokens()?;
        let rest = match keyword {
            Some(k) if toks.first() == Some(&k) => &toks[1..],
            Some(k) => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected header starting with `{k}`"),
                })
            }
            None => &toks[..],
        };
        if rest.len() != count {
            return Err(Error::Parse {
                line,
                message: format!("expected {count} integers in header, found {}", rest.len()),
            });
        }
        rest.iter()
            .map(|t| {
                t.parse::<u64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{t}` is not a nonnegative integer"),
                })
            })
            .collect()
    }

    pub(crate) fn row(&mut self, len: usize) -> Result<Vec<f64>> {
        let (line, toks) = self.next_tokens()?;
        if toks.len() != len {
            return Err(Error::Parse {
                line,
                message: format!("expected {len} values, found {}", toks.len()),
            });
        }
        toks.iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("`{t}` is not a number"),
                })
            })
            .collect()
    }

    pub(crate) fn matrix(&mut self, rows: usize, cols: usize) -> Result<Mat> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(cols)?);
        }
        Mat::new(rows, cols, data)
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            None => Ok(()),
            Some((line, _)) => Err(Error::Parse {
                line: *line,
                message: "trailing data".into(),
            }),
        }
    }
}

pub(crate) fn write_row(out: &mut String, row: &[f64]) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").expect("write to String");
    }
    out.push('\n');
}

pub(crate) fn write_matrix(out: &mut String, m: &Mat) {
    for i in 0..m.rows() {
        write_row(out, m.row(i));
    }
}
