//! The CSV layout written by `figure` and `sweep`:
//!
//! ```text
//! # hd-qkd-ratekit v0.1
//! # d=5 m=3 eps=1e-10
//! Q,rate
//! 0,2.321928094887362
//! ```
//!
//! Values use the shortest representation that parses back to the same
//! `f64`, so files are bitwise reproducible and lossless.

use std::fmt::Write as _;

use crate::record::{short_version, TOOL};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub version: String,
    /// Parameter echo; keys and values contain no whitespace or '='.
    pub params: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CsvError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

fn bad(line: usize, msg: impl Into<String>) -> CsvError {
    CsvError::Malformed {
        line,
        msg: msg.into(),
    }
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            version: short_version(),
            params: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        let value = value.to_string();
        debug_assert!(!key.contains(|c: char| c.is_whitespace() || c == '='));
        debug_assert!(!value.contains(char::is_whitespace));
        self.params.push((key.to_string(), value));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn get_param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {TOOL} {}", self.version).unwrap();
        let echo: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        writeln!(out, "# {}", echo.join(" ")).unwrap();
        writeln!(out, "{}", self.header.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (n, first) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let version = first
            .strip_prefix(&format!("# {TOOL} "))
            .filter(|v| v.starts_with('v'))
            .ok_or_else(|| bad(n, format!("expected '# {TOOL} vX.Y'")))?
            .to_string();
        let (n, second) = lines
            .next()
            .ok_or_else(|| bad(2, "missing parameter line"))?;
        let echo = second
            .strip_prefix('#')
            .ok_or_else(|| bad(n, "parameter line must start with '#'"))?;
        let mut params = Vec::new();
        for pair in echo.split_whitespace() {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| bad(n, format!("'{pair}' is not key=value")))?;
            params.push((k.to_string(), v.to_string()));
        }
        let (n, head) = lines.next().ok_or_else(|| bad(3, "missing header"))?;
        if head.trim().is_empty() {
            return Err(bad(n, "empty header"));
        }
        let header: Vec<String> = head.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| bad(n, format!("'{c}': {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != header.len() {
                return Err(bad(
                    n,
                    format!("{} cells, header has {}", row.len(), header.len()),
                ));
            }
            rows.push(row);
        }
        Ok(Self {
            version,
            params,
            header,
            rows,
        })
    }
}
