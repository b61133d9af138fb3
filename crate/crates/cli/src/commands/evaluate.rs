use std::collections::BTreeMap;
use std::path::Path;

use affectlab::harness::{families_of, fit_final, run_experiment, Dataset, ExperimentSpec};
use affectlab::learn::{loss_curve_csv, FORMAT_VERSION};
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use super::{extract_all, load_manifests, read_text, sha256_hex, write_file};
use crate::cache::{cache_root, DirCache};
use crate::provider::ProviderConfig;
use crate::{EvaluateArgs, SpecError};

/// An experiment spec plus the embedding provider it runs with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateConfig {
    #[serde(flatten)]
    pub spec: ExperimentSpec,
    #[serde(default)]
    pub provider: ProviderConfig,
}

#[derive(Serialize)]
struct ManifestRecord {
    dataset_id: String,
    path: String,
    sha256: String,
    feature_config_hashes: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    model_format_version: u16,
    config_hash: String,
    seed: u64,
    provider: String,
    provider_id: String,
    manifests: Vec<ManifestRecord>,
    report_sha256: String,
    cache: CacheStats,
}

#[derive(Serialize)]
struct CacheStats {
    hits: usize,
    misses: usize,
}

fn load_config(path: &Path, seed: Option<u64>, provider: Option<ProviderConfig>) -> Result<EvaluateConfig> {
    let text = read_text(path)?;
    let bad = |e: serde_json::Error| SpecError(format!("experiment config {}: {e}", path.display()));
    // parsed in two steps so unknown keys in the spec are still rejected
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    let provider_value = value.as_object_mut().and_then(|o| o.remove("provider"));
    let mut cfg = EvaluateConfig {
        spec: serde_json::from_value(value).map_err(bad)?,
        provider: match provider_value {
            Some(v) => serde_json::from_value(v).map_err(bad)?,
            None => ProviderConfig::default(),
        },
    };
    if let Some(s) = seed {
        cfg.spec.seed = s;
    }
    if let Some(p) = provider {
        cfg.provider = p;
    }
    cfg.spec.validate()?;
    Ok(cfg)
}

pub fn run(a: &EvaluateArgs) -> Result<()> {
    let cfg = load_config(&a.config, a.seed, a.provider.clone())?;
    let spec = &cfg.spec;
    let provider = cfg.provider.build()?;
    let manifests = load_manifests(&a.manifests)?;
    let cache = DirCache::new(cache_root(&a.out));
    let datasets = extract_all(
        &manifests,
        &spec.feature_sets,
        &spec.extraction,
        spec.missing_policy,
        provider.as_ref(),
        &cache,
    )?;
    if cache.stale() > 0 {
        eprintln!("notice: {} stale cache entries were recomputed", cache.stale());
    }
    let report = run_experiment(&datasets, spec)?;
    let report_json = report.to_json();

    let resolved = serde_json::to_string_pretty(&cfg)?;
    write_file(&a.out.join("config.json"), &resolved)?;
    write_file(&a.out.join("report.json"), &report_json)?;
    write_file(&a.out.join("report.txt"), report.table())?;
    write_file(&a.out.join("confusion.csv"), report.confusion_csv())?;

    let provider_id = provider.id();
    let records = manifests
        .iter()
        .zip(&a.manifests)
        .map(|(m, p)| {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            let hashes = families_of(&spec.feature_sets)
                .iter()
                .map(|f| {
                    (
                        f.method().to_string(),
                        f.config_hash(&spec.extraction, m.eeg_raw, &provider_id),
                    )
                })
                .collect();
            Ok(ManifestRecord {
                dataset_id: m.dataset_id.clone(),
                path: p.display().to_string(),
                sha256: sha256_hex(&bytes),
                feature_config_hashes: hashes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = Provenance {
        tool: "affectlab",
        version: env!("CARGO_PKG_VERSION"),
        model_format_version: FORMAT_VERSION,
        config_hash: sha256_hex(resolved.as_bytes())[..16].to_string(),
        seed: spec.seed,
        provider: cfg.provider.to_string(),
        provider_id,
        manifests: records,
        report_sha256: sha256_hex(report_json.as_bytes()),
        cache: CacheStats {
            hits: datasets.iter().map(|d| d.cache_hits).sum(),
            misses: datasets.iter().map(|d| d.cache_misses).sum(),
        },
    };
    write_file(
        &a.out.join("provenance.json"),
        serde_json::to_string_pretty(&provenance)?,
    )?;

    if a.save_model {
        save_model(&a.out.join("model"), &datasets, spec)?;
    }
    print!("{}", report.table());
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn save_model(dir: &Path, datasets: &[Dataset], spec: &ExperimentSpec) -> Result<()> {
    let pipe = fit_final(datasets, spec).context("fitting the final model")?;
    let mut index = Vec::new();
    for (name, model) in pipe.models() {
        let file = format!("{name}.bin");
        write_file(&dir.join(&file), model.to_bytes())?;
        index.push(file);
    }
    if !pipe.loss_curve().is_empty() {
        write_file(&dir.join("loss_curve.csv"), loss_curve_csv(pipe.loss_curve()))?;
    }
    let widths: Vec<(String, usize)> = pipe
        .feature_widths()
        .iter()
        .map(|(f, w)| (f.method().to_string(), *w))
        .collect();
    let meta = serde_json::json!({ "components": index, "feature_widths": widths, "target": spec.target });
    write_file(&dir.join("index.json"), serde_json::to_string_pretty(&meta)?)
}
