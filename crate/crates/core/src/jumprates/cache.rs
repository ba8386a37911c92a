//! On-disk cache of rate tables keyed by a hash of the estimation request.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::RateTable;
use crate::error::Result;

/// Overrides the cache directory.
pub const CACHE_DIR_ENV: &str = "DUNKL_CACHE_DIR";

#[derive(Debug, Clone)]
pub struct RateCache {
    dir: PathBuf,
}

/// Hex SHA-256 of the compact JSON form of `request`.
pub fn request_key<S: Serialize>(request: &S) -> Result<String> {
    let bytes = serde_json::to_vec(request)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RateCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RateCache { dir: dir.into() }
    }

    /// Uses `$DUNKL_CACHE_DIR` when set, else `fallback`.
    pub fn from_env(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => RateCache::new(d),
            _ => RateCache::new(fallback),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("rates-{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<RateTable>> {
        let p = self.path_for(key);
        match fs::read(&p) {
            Ok(bytes) => match serde_json::from_slice(&bytes) {
                Ok(t) => Ok(Some(t)),
                Err(e) => {
                    log::warn!("ignoring unreadable cache entry {}: {e}", p.display());
                    Ok(None)
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes through a temporary file and a rename so readers never see a
    /// partial entry.
    pub fn put(&self, key: &str, table: &RateTable) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut tmp = tempfile_in(&self.dir, key)?;
        tmp.1.write_all(&serde_json::to_vec_pretty(table)?)?;
        tmp.1.sync_all()?;
        drop(tmp.1);
        fs::rename(&tmp.0, self.path_for(key))?;
        Ok(())
    }

    pub fn get_or_compute<S, F>(&self, request: &S, compute: F) -> Result<RateTable>
    where
        S: Serialize,
        F: FnOnce() -> Result<RateTable>,
    {
        let key = request_key(request)?;
        if let Some(t) = self.get(&key)? {
            log::debug!("rate cache hit {key}");
            return Ok(t);
        }
        let t = compute()?;
        self.put(&key, &t)?;
        Ok(t)
    }
}

fn tempfile_in(dir: &Path, key: &str) -> Result<(PathBuf, fs::File)> {
    let mut attempt = 0u32;
    loop {
        let p = dir.join(format!(".rates-{key}.{}.{attempt}.tmp", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&p) {
            Ok(f) => return Ok((p, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && attempt < 64 => attempt += 1,
            Err(e) => return Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jumprates::RateSampler;
    use crate::rootsys::{build_root_system, Family, Multiplicities};

    #[test]
    fn round_trip_and_hit() {
        let dir = tempfile::tempdir().unwrap();
        let cache = RateCache::new(dir.path());
        let r = build_root_system::<f64>(Family::A, 3, 4.0, &Multiplicities::unit()).unwrap();
        let table = RateTable::from_exact(&r, &[0.1, 0.2, 0.3], RateSampler::Exact);
        let req = ("origin", 3, 4.0);
        let a = cache.get_or_compute(&req, || Ok(table.clone())).unwrap();
        let b = cache.get_or_compute(&req, || panic!("should hit")).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, table);
        let other = request_key(&("origin", 3, 5.0)).unwrap();
        assert!(cache.get(&other).unwrap().is_none());
        let leftovers = fs::read_dir(dir.path()).unwrap().filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".tmp")
        });
        assert_eq!(leftovers.count(), 0);
    }
}
