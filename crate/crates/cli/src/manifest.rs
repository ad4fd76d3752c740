use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA: &str = "edflow.manifest/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run one command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    /// Arguments after the subcommand, exactly as given.
    pub args: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub variant_id: Option<String>,
    pub horizon: Option<usize>,
    pub model_config: Option<serde_json::Value>,
    pub seed: Option<u64>,
    /// Output file names relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub wall_clock_unix_seconds: u64,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            inputs: Vec::new(),
            variant_id: None,
            horizon: None,
            model_config: None,
            seed: None,
            outputs: Vec::new(),
            wall_clock_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn file_name(&self) -> String {
        format!("manifest-{}.json", self.command)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files staged in memory and committed together.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Writes every file through a temporary sibling and a rename, then the
    /// manifest listing their digests.
    pub fn commit(self, dir: &Path, mut manifest: RunManifest) -> Result<PathBuf> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, bytes) in &self.files {
            manifest.outputs.push(FileDigest {
                path: name.clone(),
                sha256: sha256_hex(bytes),
            });
        }
        let mut files = self.files;
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        files.push((manifest.file_name(), text));
        for (name, bytes) in files {
            write_atomic(&dir.join(&name), &bytes)?;
        }
        Ok(dir.join(manifest.file_name()))
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("staging {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
