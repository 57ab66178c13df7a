//! CSV tables and the JSON run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// A table of named numeric columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Writes run artifacts into one directory.
pub struct OutputDir {
    pub dir: PathBuf,
    seed: u64,
    hash: String,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Self::create_raw(dir, cfg.seed, &cfg.hash())
    }

    /// For outputs not driven by a config (`verify`).
    pub fn create_raw(dir: &Path, seed: u64, hash: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), seed, hash: hash.to_string(), files: Vec::new() })
    }

    /// CSV with a leading `# schema=… seed=… config_sha256=…` comment line.
    pub fn write_table(&mut self, name: &str, kind: &str, table: &Table) -> Result<(), CliError> {
        let rows = table.rows.iter().map(|row| row.iter().map(|v| format_value(*v)).collect());
        self.write_records(name, kind, &table.columns, rows)
    }

    /// Like `write_table` for rows that are already strings.
    pub fn write_records(&mut self, name: &str, kind: &str, columns: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let mut out = format!("# schema=locgibbs-{kind}/{SCHEMA_VERSION} seed={} config_sha256={}\n", self.seed, self.hash);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns).map_err(io_err)?;
        for row in rows {
            w.write_record(&row).map_err(io_err)?;
        }
        out.push_str(&String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).expect("utf-8"));
        self.write_text(name, &out)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        self.write_text(name, &text)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, command: &str, cfg: &ExperimentConfig, extra: serde_json::Value) -> Result<(), CliError> {
        let manifest = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "tool": "locgibbs",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": cfg.seed,
            "config_sha256": self.hash,
            "config": cfg,
            "outputs": self.files,
            "summary": extra,
        });
        self.write_json("manifest.json", &manifest)
    }
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Shortest round-trip decimal form; non-finite values as `nan`/`inf`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

/// Reads a table written by `write_table`, skipping comment lines.
pub fn read_table(path: &Path) -> Result<(String, Table), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let header: String = text.lines().take_while(|l| l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let columns: Vec<String> = r.headers().map_err(io_err)?.iter().map(String::from).collect();
    let mut table = Table::new(columns);
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| CliError::Io(format!("{}: bad number `{s}`: {e}", path.display()))))
            .collect::<Result<Vec<f64>, CliError>>()?;
        table.rows.push(row);
    }
    Ok((header, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_round_trip() {
        for v in [0.1 + 0.2, -1e-300, 3.0, f64::INFINITY] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_value(f64::NAN), "nan");
    }
}
