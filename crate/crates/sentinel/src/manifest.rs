//! Per-directory manifest: master seed, configuration hash and the sha256 of
//! every file written next to it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::{read_json, write_json, Stamp};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    /// File name to lowercase hex sha256.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn stamp(&self) -> Stamp {
        Stamp { seed: self.seed, config_hash: self.config_hash.clone() }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Hashes `files` (names relative to `dir`) and writes `dir/manifest.json`.
pub fn write_manifest(dir: &Path, stamp: &Stamp, files: &[String]) -> Result<Manifest> {
    let mut hashes = BTreeMap::new();
    for name in files {
        hashes.insert(name.clone(), sha256_file(&dir.join(name))?);
    }
    let manifest = Manifest { seed: stamp.seed, config_hash: stamp.config_hash.clone(), files: hashes };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join(MANIFEST_FILE))
}

/// Checks every listed file against its recorded hash.
pub fn verify_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    for (name, expected) in &manifest.files {
        let path = dir.join(name);
        if &sha256_file(&path)? != expected {
            return Err(Error::format(path, "content does not match the manifest hash"));
        }
    }
    Ok(())
}
