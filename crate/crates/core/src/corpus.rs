// SPDX-License-Identifier: Apache-2.0

//! Corpus directories and seed manifests.
//!
//! A corpus is a directory of files; each regular file is one seed whose id is
//! the file stem. Manifests are JSON listing id, size and the SHA-256 of the
//! content in lowercase hex.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::runtime::Seed;
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus")]
    Empty,
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("duplicate seed id `{id}` ({first} and {second})")]
    DuplicateStem {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("file name is not valid UTF-8: {0}")]
    BadName(PathBuf),
    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads every regular file of `dir` as a seed, sorted by id. Hidden files
/// are skipped.
pub fn ingest_corpus(dir: &Path) -> Result<Vec<Seed>, CorpusError> {
    let mut by_id: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if !entry.file_type().map_err(io_err(&path))?.is_file() {
            continue;
        }
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CorpusError::BadName(path.clone()))?;
        if name.starts_with('.') {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| CorpusError::BadName(path.clone()))?
            .to_string();
        if let Some(first) = by_id.get(&stem) {
            let (a, b) = if *first < path {
                (first.clone(), path.clone())
            } else {
                (path.clone(), first.clone())
            };
            return Err(CorpusError::DuplicateStem {
                id: stem,
                first: a,
                second: b,
            });
        }
        by_id.insert(stem, path);
    }
    if by_id.is_empty() {
        return Err(CorpusError::Empty);
    }
    by_id
        .into_iter()
        .map(|(id, path)| {
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            Ok(Seed::new(id, bytes))
        })
        .collect()
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub size: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seeds: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new<'a>(seeds: impl IntoIterator<Item = &'a Seed>) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            seeds: seeds
                .into_iter()
                .map(|s| ManifestEntry {
                    id: s.id.clone(),
                    size: s.size(),
                    sha256: content_hash(&s.bytes),
                })
                .collect(),
        }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.seeds.iter().map(|e| e.id.as_str()).collect()
    }

    /// Looks the manifest's seeds up in `corpus` and checks sizes and hashes.
    pub fn resolve(&self, corpus: &[Seed]) -> Result<Vec<Seed>, String> {
        self.seeds
            .iter()
            .map(|e| {
                let s = corpus
                    .iter()
                    .find(|s| s.id == e.id)
                    .ok_or_else(|| format!("seed `{}` not in corpus", e.id))?;
                if s.size() != e.size || content_hash(&s.bytes) != e.sha256 {
                    return Err(format!("seed `{}` does not match its manifest hash", e.id));
                }
                Ok(s.clone())
            })
            .collect()
    }
}

pub fn write_manifest<'a>(seeds: impl IntoIterator<Item = &'a Seed>, path: &Path) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(&Manifest::new(seeds)).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes each seed to `dir/<id>`, creating `dir` if needed.
pub fn write_seeds<'a>(seeds: impl IntoIterator<Item = &'a Seed>, dir: &Path) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for s in seeds {
        let path = dir.join(&s.id);
        fs::write(&path, &s.bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            content_hash(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
