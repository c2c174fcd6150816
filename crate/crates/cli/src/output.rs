//! Staged artifact writes: outputs are buffered, then each file is written
//! atomically; if any write fails the ones already written are removed.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tracing::info;

use crate::failure::Failure;

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

#[derive(Debug, Serialize)]
pub struct Plan<'a> {
    pub subcommand: &'a str,
    pub reads: Vec<String>,
    pub writes: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, path: impl Into<PathBuf>, value: &T) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::data(e.to_string()))?;
        self.add(path, text + "\n");
        Ok(())
    }

    /// Line-delimited JSON, one value per line.
    pub fn add_jsonl<T: Serialize>(&mut self, path: impl Into<PathBuf>, values: &[T]) -> Result<(), Failure> {
        let mut text = String::new();
        for v in values {
            text.push_str(&serde_json::to_string(v).map_err(|e| Failure::data(e.to_string()))?);
            text.push('\n');
        }
        self.add(path, text);
        Ok(())
    }

    pub fn paths(&self) -> Vec<String> {
        self.files.iter().map(|(p, _)| p.display().to_string()).collect()
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, Failure> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            if let Err(e) = write_atomic(&path, &bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Failure::data(format!("writing {}: {e}", path.display())));
            }
            info!(path = %path.display(), bytes = bytes.len(), "artifact written");
            written.push(path);
        }
        Ok(written)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
