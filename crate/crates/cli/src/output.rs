//! Run directory: data files with content hashes and the JSON manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

pub struct RunDir {
    root: PathBuf,
    files: Vec<FileEntry>,
    started: Instant,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new(), started: Instant::now() })
    }

    /// Writes `contents` to `name` (relative to the run directory) and
    /// records its hash.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        f.write_all(contents)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: hex(&Sha256::digest(contents)),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self, command: &str, config: Value, diagnostics: Value) -> Result<()> {
        let manifest = serde_json::json!({
            "command": command,
            "config": config,
            "versions": { "dbar": env!("CARGO_PKG_VERSION") },
            "timings": { "elapsed_seconds": self.started.elapsed().as_secs_f64() },
            "files": self.files,
            "diagnostics": diagnostics,
        });
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// 17 significant digits: lossless for binary64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
