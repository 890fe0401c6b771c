//! In-memory artifact set, hashed manifest, and atomic promotion to disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: String,
    pub command: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

impl Artifacts {
    pub fn insert(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.to_string(), bytes.into());
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn manifest(&self, config: &str, command: &str, seed: u64) -> Manifest {
        Manifest {
            config: config.to_string(),
            command: command.to_string(),
            seed,
            files: self
                .files
                .iter()
                .map(|(name, bytes)| ManifestEntry {
                    file: name.clone(),
                    bytes: bytes.len() as u64,
                    sha256: hex::encode(Sha256::digest(bytes)),
                })
                .collect(),
        }
    }

    /// Writes every file plus the manifest into a staging directory next to
    /// `out`, then renames it into place. On error nothing appears at `out`.
    pub fn commit(&self, out: &Path, manifest: &Manifest) -> Result<(), CliError> {
        let staging = sibling(out, "staging");
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        let written = (|| -> std::io::Result<()> {
            fs::create_dir_all(&staging)?;
            for (name, bytes) in &self.files {
                fs::write(staging.join(name), bytes)?;
            }
            let json = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
            fs::write(staging.join(MANIFEST), json + "\n")?;
            Ok(())
        })();
        if let Err(e) = written {
            let _ = fs::remove_dir_all(&staging);
            return Err(e.into());
        }
        if out.exists() {
            let old = sibling(out, "previous");
            if old.exists() {
                fs::remove_dir_all(&old)?;
            }
            fs::rename(out, &old)?;
            if let Err(e) = fs::rename(&staging, out) {
                let _ = fs::rename(&old, out);
                return Err(e.into());
            }
            fs::remove_dir_all(&old)?;
        } else {
            fs::rename(&staging, out)?;
        }
        Ok(())
    }
}

fn sibling(out: &Path, tag: &str) -> PathBuf {
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parent.join(format!(".{name}.{tag}-{}", std::process::id()))
}
