//! Precomputed feature caches.
//!
//! A cache entry is a raw little-endian f32 file (row-major `[T, D]`) with a
//! JSON sidecar manifest at `<path>.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DTYPE_F32LE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheManifest {
    pub modality: String,
    pub shape: [usize; 2],
    pub dtype: String,
    pub source_plugin: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedFeatures {
    pub manifest: CacheManifest,
    pub values: Vec<f32>,
}

impl CachedFeatures {
    pub fn new(modality: &str, rows: usize, cols: usize, values: Vec<f32>, source: &str) -> Self {
        assert_eq!(values.len(), rows * cols, "cache values do not match shape");
        Self {
            manifest: CacheManifest {
                modality: modality.to_string(),
                shape: [rows, cols],
                dtype: DTYPE_F32LE.to_string(),
                source_plugin: source.to_string(),
            },
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.manifest.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.manifest.shape[1]
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.cols();
        &self.values[i * d..(i + 1) * d]
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

pub fn write_cache(path: &Path, features: &CachedFeatures) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, features.to_bytes()).map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&features.manifest).expect("manifest serializes");
    fs::write(&mpath, json + "\n").map_err(|e| Error::io(&mpath, e))
}

pub fn read_cache(path: &Path) -> Result<CachedFeatures> {
    let mpath = manifest_path(path);
    let mtext = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CacheManifest = serde_json::from_str(&mtext).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", mpath.display()),
    })?;
    if manifest.dtype != DTYPE_F32LE {
        return Err(Error::InvalidArgument(format!(
            "{}: unsupported dtype `{}`",
            mpath.display(),
            manifest.dtype
        )));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = manifest.shape[0] * manifest.shape[1] * 4;
    if bytes.len() != expected {
        return Err(Error::Shape(format!(
            "{}: {} bytes on disk, manifest shape {:?} needs {expected}",
            path.display(),
            bytes.len(),
            manifest.shape
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(CachedFeatures { manifest, values })
}

/// Resolves `media_refs` paths to cached features.
pub trait FeatureSource: Sync {
    fn load(&self, reference: &str) -> Result<CachedFeatures>;
}

/// Caches stored under a root directory; references are relative paths.
#[derive(Debug, Clone)]
pub struct DirSource {
    root: PathBuf,
}

impl DirSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl FeatureSource for DirSource {
    fn load(&self, reference: &str) -> Result<CachedFeatures> {
        read_cache(&self.root.join(reference))
    }
}

/// In-memory cache store, used by the synthetic generator and in tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemorySource {
    entries: BTreeMap<String, CachedFeatures>,
}

impl MemorySource {
    pub fn insert(&mut self, reference: impl Into<String>, features: CachedFeatures) {
        self.entries.insert(reference.into(), features);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &CachedFeatures)> {
        self.entries.iter()
    }

    /// Writes every entry below `root` so a [`DirSource`] can read it back.
    pub fn write_all(&self, root: &Path) -> Result<()> {
        for (reference, features) in &self.entries {
            write_cache(&root.join(reference), features)?;
        }
        Ok(())
    }
}

impl FeatureSource for MemorySource {
    fn load(&self, reference: &str) -> Result<CachedFeatures> {
        self.entries
            .get(reference)
            .cloned()
            .ok_or_else(|| Error::Other(format!("feature cache `{reference}` not found")))
    }
}

/// Source that never resolves anything; forces stub fallbacks.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoSource;

impl FeatureSource for NoSource {
    fn load(&self, reference: &str) -> Result<CachedFeatures> {
        Err(Error::Other(format!("no feature source for `{reference}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f32> = (0..12).map(|i| i as f32 * 0.5 - 2.0).collect();
        let f = CachedFeatures::new("audio", 3, 4, values, "test");
        let p = dir.path().join("a/b.f32");
        write_cache(&p, &f).unwrap();
        assert_eq!(read_cache(&p).unwrap(), f);
        assert!(manifest_path(&p).exists());
    }

    #[test]
    fn truncated_cache_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let f = CachedFeatures::new("audio", 2, 2, vec![1.0; 4], "test");
        let p = dir.path().join("x.f32");
        write_cache(&p, &f).unwrap();
        fs::write(&p, [0u8; 8]).unwrap();
        assert!(matches!(read_cache(&p), Err(Error::Shape(_))));
    }
}
