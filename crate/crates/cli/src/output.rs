//! Artifact writers.
//!
//! CSV layout: one metadata line
//! `# thinfilm <version> command=<command> config_sha256=<64 hex digits>`,
//! one row of comma-separated column names, then data rows. Numbers are
//! written in Rust's shortest round-trip scientific notation (`{:e}`), so
//! equal values always produce equal bytes. Lines end with `\n`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Version string embedded in every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance shared by the artifacts of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Meta {
    pub version: String,
    pub command: String,
    pub config_sha256: String,
}

impl Meta {
    pub fn new(command: &str, config_sha256: String) -> Self {
        Self {
            version: VERSION.to_string(),
            command: command.to_string(),
            config_sha256,
        }
    }

    /// The `#`-prefixed metadata line, without a newline.
    pub fn header_line(&self) -> String {
        format!(
            "# thinfilm {} command={} config_sha256={}",
            self.version, self.command, self.config_sha256
        )
    }
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Formats a float in shortest round-trip scientific notation.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:e}")
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(x) => f.write_str(&fmt_num(*x)),
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Renders a complete CSV document.
pub fn render_csv(meta: &Meta, columns: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    out.push_str(&meta.header_line());
    out.push('\n');
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Collects the files written by a command.
#[derive(Debug, Clone)]
pub struct OutDir {
    pub root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: vec![],
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        let mut f =
            fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        f.write_all(bytes)
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        meta: &Meta,
        columns: &[&str],
        rows: &[Vec<Cell>],
    ) -> Result<()> {
        self.write(name, render_csv(meta, columns, rows).as_bytes())
    }

    /// One JSON object per line, preceded by the metadata line.
    pub fn jsonl<T: Serialize>(&mut self, name: &str, meta: &Meta, records: &[T]) -> Result<()> {
        let mut out = meta.header_line();
        out.push('\n');
        for r in records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        self.write(name, out.as_bytes())
    }

    /// Pretty-printed JSON document.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}
