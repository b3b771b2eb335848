//! `manifest.txt`: one per output directory, plain `key=value` lines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.txt";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    command: String,
    args: Vec<String>,
    started: u64,
    settings: Vec<(String, String)>,
    inputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            started: unix_now(),
            settings: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.settings.push((key.to_string(), value.to_string()));
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    /// Writes the manifest into `dir`, listing digests of the inputs and of
    /// every other file under `dir`.
    pub fn finish(&self, dir: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "tool=genebma")?;
        writeln!(out, "version={}", env!("CARGO_PKG_VERSION"))?;
        writeln!(out, "command={}", self.command)?;
        writeln!(out, "args={}", self.args.join(" "))?;
        for (k, v) in &self.settings {
            writeln!(out, "{k}={v}")?;
        }
        for p in &self.inputs {
            writeln!(out, "input.{}={}", p.display(), sha256_file(p)?)?;
        }
        for p in list_files(dir)? {
            let rel = p.strip_prefix(dir).unwrap_or(&p);
            writeln!(out, "output.{}={}", rel.display(), sha256_file(&p)?)?;
        }
        writeln!(out, "started_unix={}", self.started)?;
        writeln!(out, "finished_unix={}", unix_now())?;
        let path = dir.join(FILE_NAME);
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))
    }
}

/// Files under `dir` (recursive, sorted), excluding manifests.
fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n != FILE_NAME) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
