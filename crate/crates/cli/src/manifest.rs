//! Run manifests: the exact argument vector plus the fully resolved
//! settings, written next to a command's primary output.

use std::path::{Path, PathBuf};

use esn_lrofr::persistence::write_atomic;
use serde::{Deserialize, Serialize};

use crate::failure::{Context, Outcome};

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest<S> {
    pub command: String,
    /// Replaying this vector reproduces the outputs bit for bit.
    pub argv: Vec<String>,
    pub created: String,
    pub library_version: String,
    pub outputs: Vec<String>,
    pub resolved: S,
}

#[derive(Debug, Deserialize)]
struct ArgvOnly {
    argv: Vec<String>,
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.toml");
    primary.with_file_name(name)
}

pub fn write<S: Serialize>(primary: &Path, manifest: &Manifest<S>) -> Outcome<PathBuf> {
    let path = manifest_path(primary);
    let text = toml::to_string(manifest)?;
    write_atomic(&path, text.as_bytes()).ctx(format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn read_argv(path: &Path) -> Outcome<Vec<String>> {
    let text = std::fs::read_to_string(path).ctx(format!("reading {}", path.display()))?;
    let m: ArgvOnly = toml::from_str(&text).ctx(format!("parsing {}", path.display()))?;
    Ok(m.argv)
}
