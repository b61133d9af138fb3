pub mod evaluate;
pub mod extract;
pub mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use affectlab::data::{load_manifest_with_warnings, DatasetManifest};
use affectlab::embedding::{serve_exchange, serve_pending, EmbeddingProvider, ServeMode};
use affectlab::harness::{
    extract_dataset, synth_generate, Dataset, ExtractionConfig, FeatureSet, MissingPolicy, SynthConfig,
};
use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use crate::cache::DirCache;
use crate::{ServeArgs, SpecError, SynthArgs};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn parse_feature_sets(names: &[String]) -> Result<Vec<FeatureSet>> {
    names
        .iter()
        .map(|n| {
            serde_json::from_value(serde_json::Value::String(n.trim().to_string()))
                .map_err(|_| SpecError(format!("unknown feature set {n:?}")).into())
        })
        .collect()
}

pub fn load_manifests(paths: &[PathBuf]) -> Result<Vec<DatasetManifest>> {
    let mut out: Vec<DatasetManifest> = Vec::new();
    for p in paths {
        let (m, warnings) =
            load_manifest_with_warnings(p).with_context(|| format!("loading manifest {}", p.display()))?;
        for w in warnings {
            log::warn!("{}: {w}", p.display());
        }
        if out.iter().any(|o| o.dataset_id == m.dataset_id) {
            bail!("dataset id {} appears in more than one manifest", m.dataset_id);
        }
        out.push(m);
    }
    Ok(out)
}

pub fn extract_all(
    manifests: &[DatasetManifest],
    sets: &[FeatureSet],
    cfg: &ExtractionConfig,
    policy: MissingPolicy,
    provider: &dyn EmbeddingProvider,
    cache: &DirCache,
) -> Result<Vec<Dataset>> {
    manifests
        .iter()
        .map(|m| {
            let d = extract_dataset(m, sets, cfg, policy, provider, Some(cache))
                .with_context(|| format!("extracting dataset {}", m.dataset_id))?;
            log::info!(
                "{}: {} trials, {} skipped, cache {} hits / {} misses",
                d.id,
                d.trials.len(),
                d.skipped.len(),
                d.cache_hits,
                d.cache_misses
            );
            Ok(d)
        })
        .collect()
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| SpecError(format!("{}: {e}", p.display())))?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| SpecError(e.to_string()))?;
    let m = synth_generate(&cfg, &a.out)?;
    println!(
        "wrote {} ({} subjects, {} trials)",
        a.out.join("manifest.json").display(),
        m.subjects.len(),
        m.n_trials()
    );
    Ok(())
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let mode = if a.echo {
        ServeMode::Echo
    } else {
        ServeMode::Stub(a.seed)
    };
    fs::create_dir_all(&a.root).with_context(|| format!("creating {}", a.root.display()))?;
    let served = if a.once {
        serve_pending(&a.root, mode)?
    } else {
        eprintln!("serving {} ({mode:?}); interrupt to stop", a.root.display());
        serve_exchange(
            &a.root,
            mode,
            &AtomicBool::new(false),
            Duration::from_millis(a.poll_ms.max(1)),
        )?
    };
    println!("served {served} job(s)");
    Ok(())
}
