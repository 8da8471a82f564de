//! Content-addressed stage cache.
//!
//! A stage's key hashes its name, the binary format version, the canonical JSON of the resolved
//! configuration subset it reads, and the keys of the stages it consumes. Artifacts live at
//! `<root>/<stage>/<hex key>.bin` and are written through a temporary file and a rename, so
//! readers never see a partial file.

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::io::{load, save, Cacheable, Decoder, Encoder, FORMAT_VERSION};
use crate::Result;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct StageKey(pub [u8; 32]);

impl StageKey {
    pub fn new(stage: &str, subset: &serde_json::Value, upstream: &[StageKey]) -> Self {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        h.update([0]);
        let (a, b, c) = FORMAT_VERSION;
        h.update(format!("{a}.{b}.{c}").as_bytes());
        h.update([0]);
        // serde_json writes objects in key order and floats in shortest round-trip form.
        h.update(serde_json::to_vec(subset).expect("JSON values serialize"));
        for k in upstream {
            h.update(k.0);
        }
        StageKey(h.finalize().into())
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for StageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StageKey({})", &self.hex()[..12])
    }
}

impl fmt::Display for StageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

#[derive(Clone, Debug)]
pub struct StageCache {
    root: PathBuf,
}

impl StageCache {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(StageCache { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, stage: &str, key: &StageKey) -> PathBuf {
        self.root.join(stage).join(format!("{}.bin", key.hex()))
    }

    pub fn contains(&self, stage: &str, key: &StageKey) -> bool {
        self.path(stage, key).is_file()
    }

    /// A stored artifact, or `None` when absent. A present but unreadable file is an error
    /// rather than a silent miss.
    pub fn get<T: Cacheable>(&self, stage: &str, key: &StageKey) -> Result<Option<T>> {
        let p = self.path(stage, key);
        if !p.is_file() {
            return Ok(None);
        }
        load(&p).map(Some)
    }

    pub fn put<T: Cacheable>(&self, stage: &str, key: &StageKey, value: &T) -> Result<()> {
        let p = self.path(stage, key);
        std::fs::create_dir_all(p.parent().expect("cache paths have a parent"))?;
        save(value, &p)
    }

    /// Loads the artifact or computes and stores it; the flag reports a cache hit.
    pub fn get_or_compute<T: Cacheable>(&self, stage: &str, key: &StageKey, f: impl FnOnce() -> Result<T>) -> Result<(T, bool)> {
        if let Some(v) = self.get(stage, key)? {
            return Ok((v, true));
        }
        let v = f()?;
        self.put(stage, key, &v)?;
        Ok((v, false))
    }
}

/// Named text files produced by a stage, cached as one artifact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    pub files: Vec<(String, String)>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every file under `dir`, returning the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let p = dir.join(name);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&p, contents)?;
            out.push(p);
        }
        Ok(out)
    }
}

impl Cacheable for Bundle {
    const KIND: &'static str = "file-bundle";
    fn encode(&self, e: &mut Encoder) {
        e.u64(self.files.len() as u64);
        for (n, c) in &self.files {
            e.str(n);
            e.str(c);
        }
    }
    fn decode(d: &mut Decoder<'_>) -> Result<Self> {
        let n = d.len(16)?;
        let files = (0..n).map(|_| Ok((d.str()?, d.str()?))).collect::<Result<Vec<_>>>()?;
        Ok(Bundle { files })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_depend_on_every_input() {
        let a = StageKey::new("atom", &json!({"dx": 0.7}), &[]);
        assert_eq!(a, StageKey::new("atom", &json!({"dx": 0.7}), &[]));
        assert_ne!(a, StageKey::new("atom", &json!({"dx": 0.71}), &[]));
        assert_ne!(a, StageKey::new("modes", &json!({"dx": 0.7}), &[]));
        let b = StageKey::new("x", &json!({}), &[a]);
        assert_ne!(b, StageKey::new("x", &json!({}), &[]));
    }

    #[test]
    fn bundle_round_trips_through_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = StageCache::new(dir.path()).unwrap();
        let key = StageKey::new("s", &json!(1), &[]);
        let mut b = Bundle::default();
        b.add("a/b.tsv", "# x\n1\n");
        let (_, hit) = cache.get_or_compute("s", &key, || Ok(b.clone())).unwrap();
        assert!(!hit);
        let (again, hit): (Bundle, bool) = cache.get_or_compute("s", &key, || unreachable!()).unwrap();
        assert!(hit);
        assert_eq!(again, b);
    }
}
