use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Output directory plus the metadata record stamped on every file.
pub struct Output {
    dir: PathBuf,
    meta: Value,
    pub written: Vec<PathBuf>,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl Output {
    pub fn new(dir: PathBuf, command: &str, seed: u64, config: &impl Serialize) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let meta = json!({
            "tool": "specreg",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "config": serde_json::to_value(config).map_err(runtime)?,
        });
        Ok(Self { dir, meta, written: Vec::new() })
    }

    /// Adds a derived quantity (calibrated Rabi frequency, bandwidth, ...) to the metadata.
    pub fn annotate(&mut self, key: &str, value: impl Serialize) -> CliResult<()> {
        self.meta[key] = serde_json::to_value(value).map_err(runtime)?;
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV file whose first line is `# ` followed by the metadata as compact JSON.
    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> specreg::Result<()>) -> CliResult<()> {
        let mut buf = format!("# {}\n", self.meta).into_bytes();
        body(&mut buf).map_err(runtime)?;
        self.write(name, buf)
    }

    /// JSON object with a `metadata` key next to the payload's own fields.
    pub fn json(&mut self, name: &str, payload: &impl Serialize) -> CliResult<()> {
        let mut value = serde_json::to_value(payload).map_err(runtime)?;
        match value.as_object_mut() {
            Some(map) => {
                map.insert("metadata".into(), self.meta.clone());
            }
            None => value = json!({"metadata": self.meta.clone(), "data": value}),
        }
        let mut text = serde_json::to_string_pretty(&value).map_err(runtime)?;
        text.push('\n');
        self.write(name, text.into_bytes())
    }
}

/// File-name-safe version of an emitter label.
pub fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
