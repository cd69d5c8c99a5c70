//! Artifact rendering. Every artifact opens with a metadata block (tool
//! versions, config hash, seed and the full config) followed by the data.
//! CSV metadata lines start with `#`, then one header row, then data rows.
//! JSON artifacts are a single object with sorted keys.

use std::fmt;

use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};

/// One table cell. Floats print in shortest round-trip form so equal runs
/// give equal bytes.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(v) if v.is_finite() => s.serialize_f64(*v),
            Cell::Num(v) => s.serialize_str(&v.to_string()),
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Bool(v) => s.serialize_bool(*v),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Empty => s.serialize_none(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Joins a vector into one cell with `;` separators.
pub fn vector_cell(v: &[f64]) -> Cell {
    Cell::Text(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
}

/// Result of one experiment: a table plus a JSON summary.
#[derive(Clone, Debug)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Value,
    /// The experiment finished without a decision (exit status 2).
    pub inconclusive: bool,
}

impl Report {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Report { columns, rows: Vec::new(), summary: Value::Null, inconclusive: false }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Index of a column by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Numeric values of one column; non-numeric cells are skipped.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter_map(|r| match &r[i] {
                Cell::Num(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                _ => None,
            })
            .collect()
    }

    /// The header row and data rows of the CSV rendering.
    pub fn csv_body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

fn versions() -> Value {
    json!({ "waist-cli": env!("CARGO_PKG_VERSION"), "waist-core": waist_core::VERSION })
}

/// Metadata recorded in every artifact.
pub fn metadata(config: &ExperimentConfig) -> Value {
    json!({
        "config": serde_json::to_value(config).expect("configs always serialize"),
        "config_sha256": config.hash(),
        "seed": config.seed,
        "subcommand": config.experiment.subcommand().name(),
        "versions": versions(),
    })
}

pub fn render(config: &ExperimentConfig, report: &Report) -> String {
    match config.format() {
        Format::Csv => {
            let mut out = format!(
                "# waist-cli {} (waist-core {})\n# subcommand: {}\n# config_sha256: {}\n# seed: {}\n# config: {}\n",
                env!("CARGO_PKG_VERSION"),
                waist_core::VERSION,
                config.experiment.subcommand().name(),
                config.hash(),
                config.seed,
                config.to_json(),
            );
            out.push_str(&report.csv_body());
            out
        }
        Format::Json => {
            let doc = json!({
                "meta": metadata(config),
                "columns": report.columns,
                "rows": report.rows,
                "summary": report.summary,
                "inconclusive": report.inconclusive,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("reports always serialize");
            s.push('\n');
            s
        }
    }
}

/// Data rows of a CSV artifact: everything after the metadata block and
/// the header row.
pub fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}
