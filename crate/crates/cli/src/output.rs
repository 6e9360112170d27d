//! CSV curves and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Renders a header line and equal-length numeric columns.
pub fn csv(header: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(header.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == rows));
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..rows {
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(c[i]));
        }
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub master_seed: u64,
    pub wall_clock_seconds: f64,
    pub warnings: Vec<String>,
    pub stages: Vec<StageTiming>,
    pub files: Vec<FileDigest>,
    pub config: RunConfig,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

/// Collects output files and timings for one command invocation.
pub struct OutputDir {
    root: PathBuf,
    started: Instant,
    stage_start: Instant,
    stages: Vec<StageTiming>,
    files: Vec<FileDigest>,
    pub warnings: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let now = Instant::now();
        Ok(Self {
            root: root.to_path_buf(),
            started: now,
            stage_start: now,
            stages: Vec::new(),
            files: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Closes the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(StageTiming {
            name: name.into(),
            seconds: (now - self.stage_start).as_secs_f64(),
        });
        self.stage_start = now;
    }

    pub fn write(&mut self, rel: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileDigest {
            path: rel.into(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(path)
    }

    pub fn finish(self, command: &str, config: &RunConfig) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            master_seed: config.run.seed,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            warnings: self.warnings,
            stages: self.stages,
            files: self.files,
            config: config.clone(),
        };
        let path = self.root.join(MANIFEST_NAME);
        let text = toml::to_string(&manifest)?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_precision() {
        let x = [0.1, -2.5e-300];
        let y = [1.0 / 3.0, 7.0];
        let text = csv(&["a", "b"], &[&x, &y]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines.len(), 3);
        let back: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(back, vec![0.1, 1.0 / 3.0]);
        assert_eq!(
            lines[2].split(',').next().unwrap().parse::<f64>().unwrap(),
            -2.5e-300
        );
    }

    #[test]
    fn digest_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
