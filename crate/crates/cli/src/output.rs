//! Output directory handling: tables, JSON documents and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub struct Run {
    dir: PathBuf,
    seed: u64,
    format: Format,
    files: Vec<String>,
    started: Instant,
}

/// Append a seed column unless the table already carries one.
pub fn with_seed_column(csv: &str, seed: u64) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    if header.split(',').next_back() == Some("seed") {
        return csv.to_string();
    }
    let mut out = format!("{header},seed\n");
    for line in lines {
        out.push_str(&format!("{line},{seed}\n"));
    }
    out
}

/// CSV text as a list of records. Numeric cells become numbers.
pub fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    let rows = lines
        .map(|line| {
            let mut row = Map::new();
            for (name, cell) in header.iter().zip(line.split(',')) {
                let v = match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => json!(x),
                    Ok(_) => Value::Null,
                    Err(_) => json!(cell),
                };
                row.insert(name.to_string(), v);
            }
            Value::Object(row)
        })
        .collect();
    Value::Array(rows)
}

/// SHA-256 of the compact JSON encoding. serde_json maps keep keys sorted, so
/// the digest does not depend on field order or platform.
pub fn config_hash(config: &Value) -> String {
    let text = serde_json::to_string(config).expect("json value serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    pub fn new(dir: &Path, seed: u64, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Run { dir: dir.to_path_buf(), seed, format, files: Vec::new(), started: Instant::now() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Write a table as `<stem>.csv` or `<stem>.json` per the run format.
    pub fn table(&mut self, stem: &str, csv: &str) -> Result<()> {
        let csv = with_seed_column(csv, self.seed);
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), &csv),
            Format::Json => {
                let text = serde_json::to_string_pretty(&csv_to_json(&csv))? + "\n";
                self.write(&format!("{stem}.json"), &text)
            }
        }
    }

    pub fn document(&mut self, stem: &str, value: &Value) -> Result<()> {
        let mut value = value.clone();
        if let Value::Object(m) = &mut value {
            m.insert("seed".into(), json!(self.seed));
        }
        let text = serde_json::to_string_pretty(&value)? + "\n";
        self.write(&format!("{stem}.json"), &text)
    }

    pub fn finish(mut self, command: &str, config: &Value) -> Result<PathBuf> {
        let manifest = json!({
            "command": command,
            "config_hash": config_hash(config),
            "config": config,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_clock_s": self.started.elapsed().as_secs_f64(),
            "files": self.files,
        });
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push("manifest.json".into());
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_column_added_once() {
        let a = with_seed_column("x,y\n1,2\n", 7);
        assert_eq!(a, "x,y,seed\n1,2,7\n");
        assert_eq!(with_seed_column(&a, 7), a);
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"a":1,"b":[1,2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"b":[1,2],"a":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn json_rows() {
        let v = csv_to_json("x,flag\n1.5,ok\nNaN,bad\n");
        assert_eq!(v[0]["x"], json!(1.5));
        assert_eq!(v[0]["flag"], json!("ok"));
        assert!(v[1]["x"].is_null());
    }
}
