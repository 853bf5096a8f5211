//! Table emission as CSV (with `#` metadata lines) or JSON.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::Format;

pub const OUTPUT_DIR_ENV: &str = "QUENCH_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(u64),
    Bool(bool),
    Num(Option<f64>),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Num(Some(x)) => format!("{x:?}"),
            Cell::Num(None) => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Num(Some(x)) if x.is_finite() => Value::from(*x),
            Cell::Num(Some(x)) => Value::String(format!("{x:?}")),
            Cell::Num(None) => Value::Null,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(Some(v))
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: String,
}

impl Metadata {
    pub fn new(subcommand: &str, seed: Option<u64>, fingerprint: &str, config: String) -> Self {
        let hash = Sha256::digest(format!("{fingerprint}\n{config}").as_bytes());
        Metadata {
            tool: "quench",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            config_sha256: hex::encode(hash),
            config,
        }
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra key/value results written as comments (CSV) or a `summary` object (JSON).
    pub summary: Vec<(String, Cell)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new(), summary: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.to_string(), value.into()));
    }

    pub fn render(&self, meta: &Metadata, format: Format) -> Result<Vec<u8>, String> {
        match format {
            Format::Csv => self.render_csv(meta),
            Format::Json => self.render_json(meta),
        }
    }

    fn render_csv(&self, meta: &Metadata) -> Result<Vec<u8>, String> {
        let mut out = Vec::new();
        let _ = writeln!(out, "# {} {}", meta.tool, meta.version);
        let _ = writeln!(out, "# subcommand = {}", meta.subcommand);
        let _ = writeln!(out, "# seed = {}", meta.seed.map_or("none".into(), |s| s.to_string()));
        let _ = writeln!(out, "# config_sha256 = {}", meta.config_sha256);
        for line in meta.config.lines() {
            let _ = writeln!(out, "# config: {line}");
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# summary: {k} = {}", v.csv());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(|e| e.to_string())?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(|e| e.to_string())?;
        }
        w.into_inner().map_err(|e| e.to_string())
    }

    fn render_json(&self, meta: &Metadata) -> Result<Vec<u8>, String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let m: Map<String, Value> = self.columns.iter().zip(r).map(|(k, v)| (k.to_string(), v.json())).collect();
                Value::Object(m)
            })
            .collect();
        let summary: Map<String, Value> = self.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
        let doc = serde_json::json!({
            "metadata": meta,
            "summary": summary,
            "rows": rows,
        });
        let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| e.to_string())?;
        out.push(b'\n');
        Ok(out)
    }
}

/// Where output goes: `None` means stdout.
pub fn destination(output: Option<&Path>, subcommand: &str, format: Format) -> Option<PathBuf> {
    let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    match (output, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => {
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            Some(d.join(format!("{subcommand}.{ext}")))
        }
        (None, None) => None,
    }
}

pub fn emit(bytes: &[u8], dest: Option<&Path>) -> std::io::Result<()> {
    match dest {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(p, bytes)
        }
        None => std::io::stdout().write_all(bytes),
    }
}
