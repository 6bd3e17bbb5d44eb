// Copyright 2026 EA-Readout Contributors
// SPDX-License-Identifier: Apache-2.0

//! Tabular and JSON writers. Column order is fixed by the caller.

use crate::config::{OutputFormat, SCHEMA_VERSION};
use crate::error::CliError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Num(x) => format!("{x:e}"),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Value::Num(x) => serde_json::Number::from_f64(*x).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Value::Int(i) => (*i).into(),
            Value::Text(s) => s.clone().into(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as u64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(internal)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Value::csv)).map_err(internal)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(internal)?).map_err(internal)?;
        let mut out = String::new();
        let _ = writeln!(out, "# schema_version={SCHEMA_VERSION}");
        out.push_str(&body);
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let m: serde_json::Map<_, _> = self.columns.iter().cloned().zip(r.iter().map(Value::json)).collect();
                serde_json::Value::Object(m)
            })
            .collect();
        serde_json::json!({ "schema_version": SCHEMA_VERSION, "columns": self.columns, "rows": rows })
    }
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Writes `table` as `<stem>.csv` or `<stem>.json`.
pub fn write_table(dir: &Path, stem: &str, table: &Table, format: OutputFormat) -> Result<PathBuf, CliError> {
    match format {
        OutputFormat::Csv => write_text(dir, &format!("{stem}.csv"), &table.to_csv()?),
        OutputFormat::Json => write_json(dir, &format!("{stem}.json"), &table.to_json()),
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(internal)?;
    text.push('\n');
    write_text(dir, name, &text)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(path.clone(), e))?;
    Ok(path)
}
