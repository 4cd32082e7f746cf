use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::settings::Settings;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

/// Record of one run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub threads: usize,
    pub config: Option<Settings>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings: Vec<StageTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_k: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub summary: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
}

/// Collects inputs, outputs and timings while a command runs.
pub struct Run {
    out_dir: Option<PathBuf>,
    manifest: RunManifest,
    clock: Instant,
}

impl Run {
    pub fn new(command: &str, settings: Option<Settings>, out_dir: Option<&Path>) -> Result<Run, CliError> {
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        Ok(Run {
            out_dir: out_dir.map(Path::to_path_buf),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                threads: rayon::current_num_threads(),
                config: settings,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: Vec::new(),
                chosen_k: None,
                summary: BTreeMap::new(),
                warnings: Vec::new(),
            },
            clock: Instant::now(),
        })
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len(),
        });
        Ok(bytes)
    }

    /// Runs `f` as a named, timed stage.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.manifest.timings.push(StageTiming {
            stage: name.to_string(),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let dir = self
            .out_dir
            .as_deref()
            .ok_or_else(|| CliError::Usage("--out-dir is required".into()))?;
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(roadclust_core::Error::from)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn set_chosen_k(&mut self, k: usize) {
        self.manifest.chosen_k = Some(k);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.manifest.summary.insert(key.to_string(), value);
    }

    pub fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.manifest.warnings.push(message);
    }

    /// Writes the manifest when there is an output directory.
    pub fn finish(mut self) -> Result<(), CliError> {
        self.manifest.timings.push(StageTiming {
            stage: "total".to_string(),
            millis: self.clock.elapsed().as_secs_f64() * 1e3,
        });
        let Some(dir) = self.out_dir.clone() else {
            return Ok(());
        };
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(roadclust_core::Error::from)?;
        text.push('\n');
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
