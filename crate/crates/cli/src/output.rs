//! JSON-lines records, CSV summaries and the run metadata file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;

/// Collects everything a command produces before it is written out.
pub struct Artifacts {
    hash: String,
    records: Vec<Value>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    /// Extra files, written verbatim under the output directory.
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(config: &ExperimentConfig) -> Self {
        Artifacts {
            hash: config.hash(),
            records: Vec::new(),
            header: Vec::new(),
            rows: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Adds one JSON-lines record; `body` must serialize to an object.
    pub fn record(&mut self, seed: u64, cell: u64, body: &impl Serialize) {
        let mut map = Map::new();
        map.insert("config_hash".into(), Value::from(self.hash.clone()));
        map.insert("seed".into(), Value::from(seed));
        map.insert("cell".into(), Value::from(cell));
        match serde_json::to_value(body).expect("records serialize") {
            Value::Object(fields) => map.extend(fields),
            other => {
                map.insert("value".into(), other);
            }
        }
        self.records.push(Value::Object(map));
    }

    pub fn summary_header(&mut self, cols: &[&str]) {
        self.header = cols.iter().map(|s| s.to_string()).collect();
    }

    pub fn summary_row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn file(&mut self, name: String, contents: String) {
        self.files.push((name, contents));
    }

    pub fn records(&self) -> &[Value] {
        &self.records
    }

    /// Writes `<stem>.jsonl`, `<stem>.csv` (when a summary was set up) and
    /// the extra files. Returns the paths written.
    pub fn write(&self, dir: &Path, stem: &str) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join(format!("{stem}.jsonl"));
        let mut out = BufWriter::new(File::create(&path)?);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        written.push(path);
        if !self.header.is_empty() {
            let path = dir.join(format!("{stem}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush()?;
            written.push(path);
        }
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Serialize)]
pub struct Metadata<'a> {
    pub version: &'a str,
    pub command: &'a str,
    pub config_hash: String,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub exit_code: u8,
    pub config: &'a ExperimentConfig,
}

pub fn write_metadata(dir: &Path, stem: &str, meta: &Metadata<'_>) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.meta.json"));
    fs::write(&path, serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(path)
}
