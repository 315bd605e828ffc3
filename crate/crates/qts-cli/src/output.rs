//! Deterministic result writers. Every artifact carries the tool version and
//! the fully resolved configuration, so a file on disk is self-describing;
//! nothing time- or host-dependent is ever emitted. Table format is CSV with
//! `#`-prefixed header comments, tree format is one pretty-printed JSON
//! document per artifact.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{OutFormat, Plan, VERSION};
use crate::error::{CliError, Result};

/// 17 significant digits: enough to reconstruct the exact f64 on read-back.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One table cell.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
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

/// A named table on its way to disk.
pub struct Artifact {
    name: &'static str,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
    /// Extra key/value header lines, in insertion order.
    notes: Vec<(String, String)>,
}

impl Artifact {
    pub fn new<S: Into<String>>(name: &'static str, columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            name,
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: String) {
        self.notes.push((key.to_string(), value));
    }
}

#[derive(Serialize)]
struct Note<'a> {
    key: &'a str,
    value: &'a str,
}

#[derive(Serialize)]
struct TreeDoc<'a> {
    version: &'a str,
    command: &'a str,
    config: &'a serde_json::value::RawValue,
    warnings: &'a [String],
    notes: Vec<Note<'a>>,
    name: &'a str,
    columns: &'a [String],
    rows: &'a [Vec<Cell>],
}

/// Writes artifacts under the plan's output directory in its chosen format,
/// with accumulated warnings repeated in every header.
pub struct Sink<'a> {
    plan: &'a Plan,
    warnings: Vec<String>,
}

impl<'a> Sink<'a> {
    pub fn new(plan: &'a Plan) -> Self {
        Self {
            plan,
            warnings: Vec::new(),
        }
    }

    pub fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn write(&self, art: &Artifact) -> Result<PathBuf> {
        fs::create_dir_all(&self.plan.out_dir).map_err(|e| {
            CliError::Validation(format!(
                "create output dir {}: {e}",
                self.plan.out_dir.display()
            ))
        })?;
        let ext = match self.plan.format {
            OutFormat::Table => "csv",
            OutFormat::Tree => "json",
        };
        let path = self.plan.out_dir.join(format!("{}.{ext}", art.name));
        let body = match self.plan.format {
            OutFormat::Table => self.render_table(art),
            OutFormat::Tree => self.render_tree(art)?,
        };
        fs::write(&path, body)
            .map_err(|e| CliError::Validation(format!("write {}: {e}", path.display())))?;
        Ok(path)
    }

    fn render_table(&self, art: &Artifact) -> Vec<u8> {
        let mut out = Vec::new();
        let _ = writeln!(out, "# qts {VERSION}");
        let _ = writeln!(out, "# command: {}", self.plan.command.as_str());
        let _ = writeln!(out, "# config: {}", self.plan.resolved);
        for w in &self.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        for (k, v) in &art.notes {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", art.columns.join(","));
        for row in &art.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    fn render_tree(&self, art: &Artifact) -> Result<Vec<u8>> {
        let config: &serde_json::value::RawValue = serde_json::from_str(&self.plan.resolved)
            .map_err(|e| CliError::Numerical(format!("resolved config round-trip: {e}")))?;
        let doc = TreeDoc {
            version: VERSION,
            command: self.plan.command.as_str(),
            config,
            warnings: &self.warnings,
            notes: art
                .notes
                .iter()
                .map(|(k, v)| Note { key: k, value: v })
                .collect(),
            name: art.name,
            columns: &art.columns,
            rows: &art.rows,
        };
        let mut body = serde_json::to_vec_pretty(&doc)
            .map_err(|e| CliError::Numerical(format!("serialize {}: {e}", art.name)))?;
        body.push(b'\n');
        Ok(body)
    }
}
