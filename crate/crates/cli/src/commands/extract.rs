use std::fmt::Write as _;
use std::path::Path;

use affectlab::harness::{families_of, Dataset, ExtractionConfig, FeatureSet, MissingPolicy};
use affectlab::learn::encode_blocks;
use anyhow::Result;
use serde::Deserialize;

use super::{extract_all, load_manifests, parse_feature_sets, read_text, write_file};
use crate::cache::{cache_root, DirCache};
use crate::provider::ProviderConfig;
use crate::{ExtractArgs, SpecError};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    feature_sets: Vec<FeatureSet>,
    extraction: ExtractionConfig,
    missing_policy: MissingPolicy,
    provider: Option<ProviderConfig>,
}

pub fn run(a: &ExtractArgs) -> Result<()> {
    let mut cfg: RunConfig = match &a.config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| SpecError(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if !a.features.is_empty() {
        cfg.feature_sets = parse_feature_sets(&a.features)?;
    }
    if cfg.feature_sets.is_empty() {
        return Err(SpecError("no feature sets selected (use --features or a config)".into()).into());
    }
    let provider_cfg = a.provider.clone().or(cfg.provider.clone()).unwrap_or_default();
    let provider = provider_cfg.build()?;
    let manifests = load_manifests(&a.manifests)?;
    let cache = DirCache::new(cache_root(&a.out));
    let datasets = extract_all(
        &manifests,
        &cfg.feature_sets,
        &cfg.extraction,
        cfg.missing_policy,
        provider.as_ref(),
        &cache,
    )?;
    for d in &datasets {
        write_dataset(&a.out.join(&d.id), d)?;
        println!(
            "{}: {} trials extracted, {} skipped; cache {} hits, {} misses",
            d.id,
            d.trials.len(),
            d.skipped.len(),
            d.cache_hits,
            d.cache_misses
        );
        for s in &d.skipped {
            println!("  skipped {}: {}", s.key, s.reason);
        }
    }
    if cache.stale() > 0 {
        println!("notice: {} stale cache entries were recomputed", cache.stale());
    }
    let methods: Vec<&str> = families_of(&cfg.feature_sets).iter().map(|f| f.method()).collect();
    println!("methods: {}", methods.join(", "));
    println!("cache: {}", cache.root().display());
    Ok(())
}

fn write_dataset(dir: &Path, d: &Dataset) -> Result<()> {
    let blocks: Vec<_> = d
        .trials
        .iter()
        .flat_map(|t| t.blocks.iter().map(|(_, b)| b.clone()))
        .collect();
    write_file(&dir.join("features.bin"), encode_blocks(&blocks))?;
    if let Some(first) = d.trials.first() {
        for (i, (family, block)) in first.blocks.iter().enumerate() {
            let mut csv = String::from("key");
            for n in &block.names {
                let _ = write!(csv, ",{n}");
            }
            csv.push('\n');
            for t in &d.trials {
                csv.push_str(&t.key);
                for v in &t.blocks[i].1.values {
                    let _ = write!(csv, ",{v}");
                }
                csv.push('\n');
            }
            write_file(&dir.join(format!("{}.csv", family.method())), csv)?;
        }
    }
    for t in &d.trials {
        if let Some(seq) = &t.sequence {
            let mut csv = String::new();
            for row in seq {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                csv.push_str(&line.join(","));
                csv.push('\n');
            }
            let name = format!("{}__{}.csv", t.subject_id, t.trial_id);
            write_file(&dir.join("eeg_face_sequence").join(name), csv)?;
        }
    }
    write_file(&dir.join("skipped.json"), serde_json::to_string_pretty(&d.skipped)?)
}
