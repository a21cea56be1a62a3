//! The JSON record written next to every file-producing run.

use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ConfigFile;

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub command: String,
    /// Effective option values after config merging.
    pub options: serde_json::Value,
    pub config_file: Option<PathBuf>,
    pub config_entries: Vec<(String, String)>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub engine_version: String,
    pub duration_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).with_context(|| format!("hashing {}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Run context shared by every command.
pub struct RunInfo {
    pub argv: Vec<String>,
    pub config: Option<ConfigFile>,
    pub threads: usize,
}

impl RunInfo {
    #[allow(clippy::too_many_arguments)]
    pub fn manifest<T: Serialize>(
        &self,
        command: &str,
        options: &T,
        inputs: &[&Path],
        outputs: &[&Path],
        seed: Option<u64>,
        elapsed: Duration,
    ) -> Result<RunManifest> {
        Ok(RunManifest {
            command_line: self.argv.clone(),
            command: command.to_string(),
            options: serde_json::to_value(options)?,
            config_file: self.config.as_ref().map(|c| c.path.clone()),
            config_entries: self.config.as_ref().map(|c| c.entries.clone()).unwrap_or_default(),
            inputs: inputs
                .iter()
                .map(|p| Ok(InputFile { path: p.to_path_buf(), sha256: sha256_file(p)? }))
                .collect::<Result<_>>()?,
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            seed,
            threads: self.threads,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: elapsed.as_secs_f64(),
        })
    }
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write(manifest: &RunManifest, primary_output: &Path) -> Result<PathBuf> {
    let path = manifest_path(primary_output);
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/model.bin")), PathBuf::from("out/model.bin.manifest.json"));
    }
}
