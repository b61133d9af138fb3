//! File-exchange protocol with an out-of-process embedder.
//!
//! Layout under the exchange root:
//!
//! - `<job_id>/NNNNN.png`: request images (8-bit RGB)
//! - `<job_id>.json`: job file `{"job_id", "images", "dim"}`, image paths
//!   relative to the root; appears atomically once all images are written
//! - `<job_id>.f32`: response, `count: u32`, `dim: u32`, then `count` rows
//!   of `dim` little-endian f32
//! - `<job_id>.err`: failure message written instead of a response
//!
//! Only one job is in flight per root, guarded by a lock file.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, StubProvider};
use crate::error::{Error, Result};
use crate::image::RgbImage;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
const LOCK_NAME: &str = ".inflight.lock";
const MAX_RESPONSE_VALUES: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeJob {
    pub job_id: String,
    pub images: Vec<String>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
}

pub fn parse_job(text: &str) -> Result<ExchangeJob> {
    let job: ExchangeJob = serde_json::from_str(text).map_err(|e| Error::parse("exchange job", e.to_string()))?;
    if job.job_id.is_empty() || job.job_id.contains(['/', '\\']) || job.job_id.starts_with('.') {
        return Err(Error::parse("exchange job", format!("bad job id {:?}", job.job_id)));
    }
    if job.dim == 0 {
        return Err(Error::parse("exchange job", "dim must be > 0"));
    }
    Ok(job)
}

pub fn encode_response(rows: &[Vec<f32>], dim: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + rows.len() * dim * 4);
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for r in rows {
        debug_assert_eq!(r.len(), dim);
        for v in r {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decodes a response body. `expected_dim` and `expected_count` are checked
/// when given; non-finite values are rejected.
pub fn parse_response(
    bytes: &[u8],
    expected_count: Option<usize>,
    expected_dim: Option<usize>,
) -> Result<Vec<Vec<f32>>> {
    if bytes.len() < 8 {
        return Err(Error::MalformedResponse(format!(
            "{} bytes is shorter than the 8-byte header",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if let Some(d) = expected_dim {
        if d != dim {
            return Err(Error::DimMismatch { expected: d, got: dim });
        }
    }
    if let Some(c) = expected_count {
        if c != count {
            return Err(Error::MalformedResponse(format!(
                "expected {c} rows, header says {count}"
            )));
        }
    }
    let values = count as u64 * dim as u64;
    if values > MAX_RESPONSE_VALUES {
        return Err(Error::MalformedResponse(format!("{count}x{dim} is implausibly large")));
    }
    let body = &bytes[8..];
    if body.len() as u64 != values * 4 {
        return Err(Error::MalformedResponse(format!(
            "body has {} bytes, header implies {}",
            body.len(),
            values * 4
        )));
    }
    if dim == 0 && count > 0 {
        return Err(Error::MalformedResponse("zero-width rows".into()));
    }
    let flat: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
        return Err(Error::MalformedResponse(format!("non-finite value in row {}", i / dim)));
    }
    Ok(flat.chunks(dim.max(1)).map(|r| r.to_vec()).take(count).collect())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(root: &Path, deadline: Instant, poll: Duration) -> Result<Self> {
        let path = root.join(LOCK_NAME);
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(LockGuard(path)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if Instant::now() >= deadline {
                        return Err(Error::Provider {
                            context: root.display().to_string(),
                            message: "another job is still in flight".into(),
                        });
                    }
                    thread::sleep(poll);
                }
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Client side of the exchange.
#[derive(Debug, Clone)]
pub struct SidecarProvider {
    pub root: PathBuf,
    pub dim: usize,
    pub timeout: Duration,
    pub poll: Duration,
    pub profile: Option<String>,
}

impl SidecarProvider {
    pub fn new(root: impl Into<PathBuf>, dim: usize) -> Self {
        SidecarProvider {
            root: root.into(),
            dim,
            timeout: DEFAULT_TIMEOUT,
            poll: Duration::from_millis(20),
            profile: None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn new_job_id() -> String {
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        format!(
            "job-{}-{}-{:x}",
            std::process::id(),
            COUNTER.fetch_add(1, Ordering::Relaxed),
            nanos
        )
    }

    fn run_job(&self, images: &[RgbImage], deadline: Instant) -> Result<Vec<Vec<f64>>> {
        let job_id = Self::new_job_id();
        let dir = self.root.join(&job_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut names = Vec::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            let name = format!("{job_id}/{i:05}.png");
            img.save_png(&self.root.join(&name))?;
            names.push(name);
        }
        let job = ExchangeJob {
            job_id: job_id.clone(),
            images: names,
            dim: self.dim,
            profile: self.profile.clone(),
        };
        let job_path = self.root.join(format!("{job_id}.json"));
        write_atomic(
            &job_path,
            serde_json::to_string(&job).expect("job serializes").as_bytes(),
        )?;

        let resp = self.root.join(format!("{job_id}.f32"));
        let err = self.root.join(format!("{job_id}.err"));
        let cleanup = || {
            let _ = fs::remove_dir_all(&dir);
            let _ = fs::remove_file(&job_path);
            let _ = fs::remove_file(&resp);
            let _ = fs::remove_file(&err);
        };
        loop {
            if resp.exists() {
                let bytes = fs::read(&resp).map_err(|e| Error::io(&resp, e));
                cleanup();
                let rows = parse_response(&bytes?, Some(images.len()), Some(self.dim))?;
                return Ok(rows
                    .into_iter()
                    .map(|r| r.into_iter().map(f64::from).collect())
                    .collect());
            }
            if err.exists() {
                let msg = fs::read_to_string(&err).unwrap_or_default();
                cleanup();
                return Err(Error::Provider {
                    context: job_id,
                    message: msg.trim().to_string(),
                });
            }
            if Instant::now() >= deadline {
                cleanup();
                return Err(Error::Timeout(self.timeout));
            }
            thread::sleep(self.poll);
        }
    }
}

impl EmbeddingProvider for SidecarProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("sidecar:{}:{}", self.profile.as_deref().unwrap_or("generic"), self.dim)
    }

    fn embed_batch(&self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let deadline = Instant::now() + self.timeout;
        let _lock = LockGuard::acquire(&self.root, deadline, self.poll)?;
        self.run_job(images, deadline)
    }
}

/// How an in-process server answers jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServeMode {
    /// Zero vectors with the requested width.
    Echo,
    /// The seeded stub projection.
    Stub(u64),
}

fn answer(root: &Path, job: &ExchangeJob, mode: ServeMode) -> std::result::Result<Vec<Vec<f32>>, String> {
    let mut images = Vec::with_capacity(job.images.len());
    for name in &job.images {
        let img = RgbImage::load_png(&root.join(name)).map_err(|e| format!("unreadable image {name}: {e}"))?;
        images.push(img);
    }
    match mode {
        ServeMode::Echo => Ok(vec![vec![0.0; job.dim]; images.len()]),
        ServeMode::Stub(seed) => StubProvider::with_dim(seed, job.dim)
            .embed_batch(&images)
            .map(|rows| {
                rows.into_iter()
                    .map(|r| r.into_iter().map(|v| v as f32).collect())
                    .collect()
            })
            .map_err(|e| e.to_string()),
    }
}

/// Answers every job currently waiting under `root`; returns how many.
pub fn serve_pending(root: &Path, mode: ServeMode) -> Result<usize> {
    let mut jobs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    jobs.sort();
    let mut served = 0;
    for path in jobs {
        let Ok(text) = fs::read_to_string(&path) else {
            continue;
        };
        let job = match parse_job(&text) {
            Ok(j) => j,
            Err(e) => {
                log::warn!("ignoring bad job file {}: {e}", path.display());
                let _ = fs::remove_file(&path);
                continue;
            }
        };
        match answer(root, &job, mode) {
            Ok(rows) => write_atomic(
                &root.join(format!("{}.f32", job.job_id)),
                &encode_response(&rows, job.dim),
            )?,
            Err(msg) => write_atomic(&root.join(format!("{}.err", job.job_id)), msg.as_bytes())?,
        }
        let _ = fs::remove_file(&path);
        served += 1;
    }
    Ok(served)
}

/// Serves jobs until `stop` is set.
pub fn serve_exchange(root: &Path, mode: ServeMode, stop: &AtomicBool, poll: Duration) -> Result<usize> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut total = 0;
    while !stop.load(Ordering::Relaxed) {
        total += serve_pending(root, mode)?;
        thread::sleep(poll);
    }
    Ok(total)
}
