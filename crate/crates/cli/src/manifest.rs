//! Run manifest: what was asked for, what was read and what was written.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use indra_core::io::{inspect, MAGIC};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub bytes: u64,
    /// CRC-32 of the whole file.
    pub crc32: u32,
    /// CRC-32 stored in an `INDR` trailer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload_crc: Option<u32>,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let payload_crc = if bytes.starts_with(MAGIC) { Some(inspect(&bytes)?.payload_crc) } else { None };
        Ok(Self { path: path.to_path_buf(), bytes: bytes.len() as u64, crc32: crc32fast::hash(&bytes), payload_crc })
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

/// Collects inputs and outputs of one run.
#[derive(Debug, Default)]
pub struct Run {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

impl Run {
    pub fn input(&mut self, p: &Path) {
        if !self.inputs.iter().any(|q| q == p) {
            self.inputs.push(p.to_path_buf());
        }
    }

    pub fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    pub fn finish(self, dir: &Path, config: serde_json::Value, threads: usize) -> Result<()> {
        let manifest = Manifest {
            tool: "indra",
            version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            config,
            seed: self.seed,
            threads,
            inputs: self.inputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}
