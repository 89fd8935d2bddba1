//! CSV rendering. Numbers are written with 17 significant digits so every
//! value round-trips to the same double; log10 of an exact zero is written
//! as `-inf`.

use std::fmt::Write as _;

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Flag(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Flag(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_num(*x),
            Cell::Flag(b) => (if *b { "1" } else { "0" }).into(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// A figure's data plus the notes that go into its header.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new(), notes: Vec::new() }
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Numeric values of one column (non-numeric cells become NaN).
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .map(|r| match &r[j] {
                Cell::Num(x) => *x,
                Cell::Flag(b) => f64::from(u8::from(*b)),
                Cell::Text(_) => f64::NAN,
            })
            .collect()
    }

    pub fn render(&self, command: &str, cfg: &RunConfig) -> String {
        let mut out = String::new();
        writeln!(out, "# thermo {} {}", env!("CARGO_PKG_VERSION"), command).unwrap();
        for n in &self.notes {
            writeln!(out, "# {n}").unwrap();
        }
        writeln!(out, "# config:").unwrap();
        let json = serde_json::to_string_pretty(cfg).expect("config serializes");
        for line in json.lines() {
            writeln!(out, "# {line}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }
}

/// Splits a rendered CSV into its header and rows, skipping comment lines.
pub fn parse_rows(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().map(|h| h.split(',').map(str::to_owned).collect()).unwrap_or_default();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}
