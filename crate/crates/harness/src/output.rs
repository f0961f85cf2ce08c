//! Data files and run manifests.
//!
//! Every run that writes data writes exactly two files: the data file at
//! the requested path and `<path>.manifest.json` next to it. The data
//! file names its manifest (CSV: a leading `# manifest:` line; JSON: a
//! top-level `manifest` field) and the manifest echoes the config, the
//! data file name, and the summary, so neither file can go orphaned.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use inl_core::CMatrix;

use crate::config::OutputFormat;
use crate::{Error, Result};

/// 17 significant digits; round-trips every finite f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One typed cell, so CSV and JSON render from the same table.
#[derive(Debug, Clone)]
pub enum Cell {
    UInt(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::UInt(v) => v.to_string(),
            Cell::Float(x) => fmt_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::UInt(v) => json!(v),
            // JSON has no NaN; absent values become null
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Float(_) => Value::Null,
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width != header width");
        self.rows.push(row);
    }

    pub fn to_csv(&self, manifest: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(m) = manifest {
            s.push_str("# manifest: ");
            s.push_str(m);
            s.push('\n');
        }
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self, manifest: Option<&str>) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let fields: serde_json::Map<String, Value> = self
                    .header
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::json))
                    .collect();
                Value::Object(fields)
            })
            .collect();
        let mut top = serde_json::Map::new();
        if let Some(m) = manifest {
            top.insert("manifest".into(), json!(m));
        }
        top.insert("rows".into(), Value::Array(rows));
        Value::Object(top)
    }

    pub fn render(&self, format: OutputFormat, manifest: Option<&str>) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(manifest),
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.to_json(manifest))
                    .expect("json value serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// Row-major complex matrix as a list of [re, im] pairs.
pub fn matrix_to_json(c: &CMatrix) -> Value {
    let entries: Vec<Value> = c.data().iter().map(|z| json!([z.re, z.im])).collect();
    json!({ "dim": c.dim(), "entries": entries })
}

pub fn matrix_from_json(v: &Value) -> Result<CMatrix> {
    let bad = |msg: &str| Error::config(format!("matrix json: {msg}"));
    let dim = v
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| bad("missing dim"))? as usize;
    let entries = v
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing entries"))?;
    let mut data = Vec::with_capacity(entries.len());
    for e in entries {
        let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| bad("entry is not a pair"))?;
        let re = pair[0].as_f64().ok_or_else(|| bad("re is not a number"))?;
        let im = pair[1].as_f64().ok_or_else(|| bad("im is not a number"))?;
        data.push(Complex64::new(re, im));
    }
    Ok(CMatrix::from_slice(dim, &data)?)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: Value,
    pub data_file: String,
    pub wall_clock_seconds: f64,
    pub summary: Value,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Write the data file, then its manifest. Returns the manifest path.
pub fn write_run(
    out: &Path,
    format: OutputFormat,
    table: &Table,
    config: &Value,
    summary: &Value,
    wall_clock_seconds: f64,
) -> Result<PathBuf> {
    let mpath = manifest_path(out);
    let mref = mpath
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("manifest.json")
        .to_string();
    fs::write(out, table.render(format, Some(&mref)))?;
    let manifest = RunManifest {
        tool: "inl",
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        data_file: out
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string(),
        wall_clock_seconds,
        summary: summary.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&mpath, text)?;
    Ok(mpath)
}
