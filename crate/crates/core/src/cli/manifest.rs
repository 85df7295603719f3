use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::hashing::sha256_hex;
use crate::pipeline::PipelineConfig;

/// Record of one command run: enough to rerun it and check the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub config: PipelineConfig,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    /// Input path -> SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to `--out` (the file name for single files) ->
    /// SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn file_sha(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn walk(dir: &Path, base: &Path, out: &mut BTreeMap<String, String>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            walk(&p, base, out)?;
        } else {
            let rel = p.strip_prefix(base).unwrap_or(&p);
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.insert(key, file_sha(&p)?);
        }
    }
    Ok(())
}

/// Checksums of everything written at `out`.
pub fn hash_outputs(out: &Path) -> std::io::Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    if out.is_dir() {
        walk(out, out, &mut m)?;
    } else if out.exists() {
        let name = out.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        m.insert(name, file_sha(out)?);
    }
    Ok(m)
}

impl Manifest {
    pub fn write(&self, out: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(manifest_path(out), text)
    }

    pub fn read(path: &Path) -> Result<Manifest, crate::Error> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
