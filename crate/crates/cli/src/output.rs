//! Artifact emission: CSV tables with `# key: value` metadata lines and JSON
//! reports with sorted keys.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything that determines a run. Output paths are excluded so that the
/// hash only depends on the numerics.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub params: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn new(command: &str, seed: u64) -> Self {
        Self { command: command.to_string(), seed, params: BTreeMap::new() }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.to_string(), serde_json::to_value(value).expect("serializable parameter"));
        self
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("serializable config");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }

    pub fn metadata(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("version".into(), Value::from(VERSION));
        m.insert("command".into(), Value::from(self.command.clone()));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert("config_hash".into(), Value::from(self.hash()));
        for (k, v) in &self.params {
            m.insert(format!("param.{k}"), v.clone());
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(i) => i.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key: value` lines after the run metadata.
    pub summary: BTreeMap<String, Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), summary: BTreeMap::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn summarize(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).expect("serializable summary"));
    }
}

fn meta_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() => format!("{x:.16e}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

pub fn render_csv(config: &RunConfig, table: &Table) -> Result<String, CliError> {
    let mut out = String::new();
    for (k, v) in config.metadata() {
        out.push_str(&format!("# {k}: {}\n", meta_value(&v)));
    }
    for (k, v) in &table.summary {
        out.push_str(&format!("# summary.{k}: {}\n", meta_value(v)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns).map_err(CliError::io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(CliError::io)?;
    }
    let body = w.into_inner().map_err(|e| CliError::io(e.into_error()))?;
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn render_json(config: &RunConfig, result: &impl Serialize) -> Result<String, CliError> {
    let mut top = serde_json::Map::new();
    top.insert("metadata".into(), serde_json::to_value(config.metadata()).map_err(CliError::io)?);
    top.insert("result".into(), serde_json::to_value(result).map_err(CliError::io)?);
    // round-trip through Value so every nested map is key-sorted
    let mut text = serde_json::to_string_pretty(&Value::Object(top)).map_err(CliError::io)?;
    text.push('\n');
    Ok(text)
}

/// Write to `path`, or stdout when `None`. Files are written through a
/// temporary sibling so a failed run never leaves a partial artifact.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(CliError::io)?;
            out.flush().map_err(CliError::io)
        }
        Some(p) => {
            let mut tmp = PathBuf::from(p);
            tmp.set_extension("partial");
            fs::write(&tmp, text).map_err(CliError::io)?;
            fs::rename(&tmp, p).map_err(CliError::io)
        }
    }
}
