//! On-disk feature cache: `<root>/<method>/<config hash>/<dataset>/<subject>/<trial>.bin`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use affectlab::data::FeatureBlock;
use affectlab::harness::BlockCache;
use affectlab::learn::{decode_blocks, encode_blocks};

pub const CACHE_ENV: &str = "AFFECTLAB_CACHE";

pub struct DirCache {
    root: PathBuf,
    stale: AtomicUsize,
}

/// Cache root: `AFFECTLAB_CACHE` when set, else `<out>/cache`.
pub fn cache_root(out: &Path) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => out.join("cache"),
    }
}

fn safe(component: &str) -> String {
    let s: String = component
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        format!("_{s}")
    } else {
        s
    }
}

impl DirCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirCache {
            root: root.into(),
            stale: AtomicUsize::new(0),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Entries that existed but could not be used and were recomputed.
    pub fn stale(&self) -> usize {
        self.stale.load(Ordering::Relaxed)
    }

    fn path(&self, method: &str, hash: &str, key: &str) -> PathBuf {
        let mut p = self.root.join(safe(method)).join(safe(hash));
        for part in key.split('/') {
            p.push(safe(part));
        }
        p.set_extension("bin");
        p
    }
}

impl BlockCache for DirCache {
    fn get(&self, method: &str, hash: &str, key: &str) -> Option<FeatureBlock> {
        let path = self.path(method, hash, key);
        let bytes = fs::read(&path).ok()?;
        let reason = match decode_blocks(&bytes) {
            Ok(mut blocks) if blocks.len() == 1 && blocks[0].method == method => return blocks.pop(),
            Ok(_) => "unexpected contents".to_string(),
            Err(e) => e.to_string(),
        };
        self.stale.fetch_add(1, Ordering::Relaxed);
        log::warn!("cache entry {} unusable ({reason}); recomputing", path.display());
        None
    }

    fn put(&self, method: &str, hash: &str, key: &str, block: &FeatureBlock) {
        let path = self.path(method, hash, key);
        let write = || -> std::io::Result<()> {
            fs::create_dir_all(path.parent().expect("cache paths have parents"))?;
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            fs::write(&tmp, encode_blocks(std::slice::from_ref(block)))?;
            fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            log::warn!("could not write cache entry {}: {e}", path.display());
        }
    }
}
