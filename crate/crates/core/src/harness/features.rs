//! Per-trial feature extraction for an experiment's feature sets.
//!
//! Fixed-length families (band PSD, entropy, HRV, GSR statistics, face
//! geometry) are computed once per trial. Embedding families keep the raw
//! provider vectors; PCA is fitted later, inside each fold, on training
//! trials only.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cardiac::{cardiac_embedding, cardiac_hrv_features};
use crate::data::{DatasetManifest, FeatureBlock, Modality, TrialLabels, TrialRecording, TrialRef};
use crate::eeg::{
    band_psd_features, pairwise_entropy_features, per_second_eeg_images, preprocess_eeg, trial_topo_image,
    EntropyDirection, MutualInfoEstimatorConfig, PsdConfig, TOPO_GRID,
};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::face::{face_embedding_stats, face_frame_embeddings, face_geometry_features};
use crate::gsr::{gsr_embedding, gsr_stat_features};
use crate::image::{RgbImage, EMBED_SIZE};
use crate::layout::ScalpLayout;

/// User-facing feature selections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// Band PSD, pairwise conditional entropy and topography embedding.
    Eeg,
    EegPsd,
    EegEntropy,
    EegTopo,
    /// HRV statistics plus spectrogram embedding.
    Cardiac,
    /// GSR statistics plus spectrogram embedding.
    Gsr,
    /// Landmark geometry.
    Face1,
    /// Face-crop embeddings.
    Face2,
    /// Per-second EEG topography and face embeddings for the LSTM.
    EegFaceLstm,
}

impl FeatureSet {
    pub fn families(self) -> &'static [Family] {
        use Family::*;
        match self {
            FeatureSet::Eeg => &[EegPsd, EegEntropy, EegTopo],
            FeatureSet::EegPsd => &[EegPsd],
            FeatureSet::EegEntropy => &[EegEntropy],
            FeatureSet::EegTopo => &[EegTopo],
            FeatureSet::Cardiac => &[CardiacHrv, CardiacSpectrogram],
            FeatureSet::Gsr => &[GsrStats, GsrSpectrogram],
            FeatureSet::Face1 => &[FaceGeometry],
            FeatureSet::Face2 => &[FaceFrames],
            FeatureSet::EegFaceLstm => &[EegFaceSequence],
        }
    }
}

/// Atomic extractors. A feature set is a list of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    EegPsd,
    EegEntropy,
    EegTopo,
    CardiacHrv,
    CardiacSpectrogram,
    GsrStats,
    GsrSpectrogram,
    FaceGeometry,
    FaceFrames,
    EegFaceSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    /// Used as is.
    Fixed,
    /// Raw provider output, reduced by a per-fold PCA.
    Embedding,
    /// Per-second rows for the LSTM.
    Sequence,
}

/// What a family reads from a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Eeg,
    Cardiac,
    Gsr,
    Landmarks,
    FaceFrames,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Eeg => "EEG",
            Source::Cardiac => "ECG/PPG",
            Source::Gsr => "GSR",
            Source::Landmarks => "landmarks",
            Source::FaceFrames => "face frames",
        })
    }
}

impl Family {
    pub fn method(self) -> &'static str {
        match self {
            Family::EegPsd => "eeg_psd",
            Family::EegEntropy => "eeg_entropy",
            Family::EegTopo => "eeg_topo_embedding",
            Family::CardiacHrv => "cardiac_hrv",
            Family::CardiacSpectrogram => "cardiac_embedding",
            Family::GsrStats => "gsr_stats",
            Family::GsrSpectrogram => "gsr_embedding",
            Family::FaceGeometry => "face_geometry",
            Family::FaceFrames => "face_embedding",
            Family::EegFaceSequence => "eeg_face_sequence",
        }
    }

    pub fn kind(self) -> FamilyKind {
        match self {
            Family::EegTopo | Family::CardiacSpectrogram | Family::GsrSpectrogram | Family::FaceFrames => {
                FamilyKind::Embedding
            }
            Family::EegFaceSequence => FamilyKind::Sequence,
            _ => FamilyKind::Fixed,
        }
    }

    pub fn sources(self) -> &'static [Source] {
        match self {
            Family::EegPsd | Family::EegEntropy | Family::EegTopo => &[Source::Eeg],
            Family::CardiacHrv | Family::CardiacSpectrogram => &[Source::Cardiac],
            Family::GsrStats | Family::GsrSpectrogram => &[Source::Gsr],
            Family::FaceGeometry => &[Source::Landmarks],
            Family::FaceFrames => &[Source::FaceFrames],
            Family::EegFaceSequence => &[Source::Eeg, Source::FaceFrames],
        }
    }

    /// Hash of exactly the settings this family's output depends on.
    pub fn config_hash(self, cfg: &ExtractionConfig, eeg_raw: bool, provider_id: &str) -> String {
        let v = match self {
            Family::EegPsd => serde_json::json!({"raw": eeg_raw, "psd": cfg.psd}),
            Family::EegEntropy => serde_json::json!({
                "raw": eeg_raw, "mi": cfg.entropy, "direction": cfg.entropy_direction
            }),
            Family::EegTopo => serde_json::json!({
                "raw": eeg_raw, "psd": cfg.psd, "grid": cfg.topo_grid, "provider": provider_id
            }),
            Family::CardiacHrv | Family::GsrStats | Family::FaceGeometry => serde_json::json!({}),
            Family::CardiacSpectrogram | Family::GsrSpectrogram | Family::FaceFrames => {
                serde_json::json!({ "provider": provider_id })
            }
            Family::EegFaceSequence => serde_json::json!({
                "raw": eeg_raw, "grid": cfg.topo_grid, "provider": provider_id
            }),
        };
        let digest = Sha256::digest(format!("{}:{}:{v}", self.method(), crate_version()).as_bytes());
        hex::encode(&digest[..8])
    }
}

fn crate_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Extraction settings shared by every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub psd: PsdConfig,
    pub entropy: MutualInfoEstimatorConfig,
    pub entropy_direction: EntropyDirection,
    pub topo_grid: usize,
    /// Output width of each embedding family's PCA.
    pub deep_dim: usize,
    /// Per-second feature width fed to the LSTM.
    pub sequence_dim: usize,
    /// Cap on training time steps used to fit the sequence PCA.
    pub sequence_pca_rows: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            psd: PsdConfig::default(),
            entropy: MutualInfoEstimatorConfig::default(),
            entropy_direction: EntropyDirection::default(),
            topo_grid: TOPO_GRID,
            deep_dim: 30,
            sequence_dim: 60,
            sequence_pca_rows: 600,
        }
    }
}

/// Which trials survive a missing modality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop a trial only if it lacks a source this experiment reads.
    #[default]
    PerExperiment,
    /// Drop a trial if it lacks any source the dataset provides at all.
    AllModalities,
}

/// Optional store for computed blocks, keyed by method, config hash and
/// trial key.
pub trait BlockCache: Sync {
    fn get(&self, method: &str, config_hash: &str, trial_key: &str) -> Option<FeatureBlock>;
    fn put(&self, method: &str, config_hash: &str, trial_key: &str, block: &FeatureBlock);
}

/// Everything the protocols need from one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFeatures {
    pub key: String,
    pub dataset_id: String,
    pub subject_id: String,
    pub trial_id: String,
    pub labels: TrialLabels,
    pub scale: (f64, f64),
    /// Non-sequence families, in feature-set order.
    pub blocks: Vec<(Family, FeatureBlock)>,
    /// `[second][feature]` rows for the LSTM path.
    pub sequence: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTrial {
    pub key: String,
    pub reason: String,
}

/// Extracted features of one manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub trials: Vec<TrialFeatures>,
    pub skipped: Vec<SkippedTrial>,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

/// Families of `sets`, deduplicated, in first-seen order.
pub fn families_of(sets: &[FeatureSet]) -> Vec<Family> {
    let mut out = Vec::new();
    for s in sets {
        for f in s.families() {
            if !out.contains(f) {
                out.push(*f);
            }
        }
    }
    out
}

fn available_sources(m: &DatasetManifest) -> Vec<Source> {
    let mut out = Vec::new();
    let any = |f: &dyn Fn(&crate::data::TrialEntry) -> bool| m.subjects.iter().flat_map(|s| &s.trials).any(f);
    if any(&|t| t.files.contains_key(&Modality::Eeg)) {
        out.push(Source::Eeg);
    }
    if any(&|t| t.files.contains_key(&Modality::Ecg) || t.files.contains_key(&Modality::Ppg)) {
        out.push(Source::Cardiac);
    }
    if any(&|t| t.files.contains_key(&Modality::Gsr)) {
        out.push(Source::Gsr);
    }
    if any(&|t| t.landmarks.is_some()) {
        out.push(Source::Landmarks);
    }
    if any(&|t| !t.face_frames.is_empty()) {
        out.push(Source::FaceFrames);
    }
    out
}

fn has_source(t: &TrialRef<'_>, s: Source) -> bool {
    match s {
        Source::Eeg => t.has(Modality::Eeg),
        Source::Cardiac => t.has(Modality::Ecg) || t.has(Modality::Ppg),
        Source::Gsr => t.has(Modality::Gsr),
        Source::Landmarks => t.trial.landmarks.is_some(),
        Source::FaceFrames => !t.trial.face_frames.is_empty(),
    }
}

/// Face crops of a trial, resized to the embedding input size.
pub fn load_face_frames(t: &TrialRef<'_>) -> Result<Vec<RgbImage>> {
    t.face_frame_paths()
        .iter()
        .map(|p| Ok(RgbImage::load_png(p)?.resize_bilinear(EMBED_SIZE, EMBED_SIZE)))
        .collect()
}

/// Per-trial inputs loaded lazily and at most once.
struct Inputs<'a> {
    t: TrialRef<'a>,
    eeg: Option<TrialRecording>,
    cardiac: Option<TrialRecording>,
    gsr: Option<TrialRecording>,
    faces: Option<Vec<RgbImage>>,
}

impl<'a> Inputs<'a> {
    fn eeg(&mut self) -> Result<&TrialRecording> {
        if self.eeg.is_none() {
            let rec = self
                .t
                .load(Modality::Eeg)?
                .ok_or_else(|| Error::InvalidSignal("no EEG".into()))?;
            self.eeg = Some(preprocess_eeg(&rec, self.t.manifest.eeg_raw)?);
        }
        Ok(self.eeg.as_ref().unwrap())
    }

    fn cardiac(&mut self) -> Result<&TrialRecording> {
        if self.cardiac.is_none() {
            let rec = match self.t.load(Modality::Ecg)? {
                Some(r) => r,
                None => self
                    .t
                    .load(Modality::Ppg)?
                    .ok_or_else(|| Error::InvalidSignal("no ECG or PPG".into()))?,
            };
            self.cardiac = Some(rec);
        }
        Ok(self.cardiac.as_ref().unwrap())
    }

    fn gsr(&mut self) -> Result<&TrialRecording> {
        if self.gsr.is_none() {
            self.gsr = Some(
                self.t
                    .load(Modality::Gsr)?
                    .ok_or_else(|| Error::InvalidSignal("no GSR".into()))?,
            );
        }
        Ok(self.gsr.as_ref().unwrap())
    }

    fn faces(&mut self) -> Result<&[RgbImage]> {
        if self.faces.is_none() {
            self.faces = Some(load_face_frames(&self.t)?);
        }
        Ok(self.faces.as_ref().unwrap())
    }
}

fn compute_block(
    family: Family,
    inp: &mut Inputs<'_>,
    layout: Option<&ScalpLayout>,
    cfg: &ExtractionConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<FeatureBlock> {
    let trial_id = inp.t.trial.trial_id.clone();
    let layout = || layout.ok_or_else(|| Error::InvalidManifest("EEG features need a scalp layout".into()));
    let emb_block = |modality: &str, values: Vec<f64>| {
        FeatureBlock::indexed(trial_id.clone(), modality, family.method(), family.method(), values)
    };
    match family {
        Family::EegPsd => band_psd_features(inp.eeg()?, layout()?, &cfg.psd),
        Family::EegEntropy => pairwise_entropy_features(inp.eeg()?, &cfg.entropy, cfg.entropy_direction),
        Family::EegTopo => {
            let l = layout()?;
            let img = trial_topo_image(inp.eeg()?, l, &cfg.psd, cfg.topo_grid)?.resize_bilinear(EMBED_SIZE, EMBED_SIZE);
            Ok(emb_block("EEG", provider.embed(&img)?))
        }
        Family::CardiacHrv => cardiac_hrv_features(inp.cardiac()?),
        Family::CardiacSpectrogram => {
            let rec = inp.cardiac()?;
            let m = rec.modality.as_str().to_string();
            Ok(emb_block(&m, cardiac_embedding(rec, provider)?))
        }
        Family::GsrStats => gsr_stat_features(inp.gsr()?),
        Family::GsrSpectrogram => Ok(emb_block("GSR", gsr_embedding(inp.gsr()?, provider)?)),
        Family::FaceGeometry => {
            let track = inp
                .t
                .load_landmarks()?
                .ok_or_else(|| Error::InvalidSignal("no landmarks".into()))?;
            face_geometry_features(&track)
        }
        Family::FaceFrames => Ok(emb_block("FACE", face_embedding_stats(inp.faces()?, provider)?)),
        Family::EegFaceSequence => unreachable!("sequences are not blocks"),
    }
}

/// One row per whole second: that second's EEG topography embedding
/// followed by the embedding of the face frame covering it.
fn compute_sequence(
    inp: &mut Inputs<'_>,
    layout: Option<&ScalpLayout>,
    cfg: &ExtractionConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<Vec<f64>>> {
    let layout = layout.ok_or_else(|| Error::InvalidManifest("EEG features need a scalp layout".into()))?;
    let images: Vec<RgbImage> = per_second_eeg_images(inp.eeg()?, layout, cfg.topo_grid)?
        .iter()
        .map(|i| i.resize_bilinear(EMBED_SIZE, EMBED_SIZE))
        .collect();
    let eeg_rows = provider.embed_batch(&images)?;
    let face_rows = face_frame_embeddings(inp.faces()?, provider)?;
    let (t_n, f_n) = (eeg_rows.len(), face_rows.len());
    Ok(eeg_rows
        .into_iter()
        .enumerate()
        .map(|(s, mut row)| {
            row.extend_from_slice(&face_rows[(s * f_n / t_n).min(f_n - 1)]);
            row
        })
        .collect())
}

/// Extracts `sets` for every usable trial of `manifest`.
pub fn extract_dataset(
    manifest: &DatasetManifest,
    sets: &[FeatureSet],
    cfg: &ExtractionConfig,
    policy: MissingPolicy,
    provider: &dyn EmbeddingProvider,
    cache: Option<&dyn BlockCache>,
) -> Result<Dataset> {
    let families = families_of(sets);
    if families.is_empty() {
        return Err(Error::InvalidExperiment("no feature sets selected".into()));
    }
    let mut required: Vec<Source> = families.iter().flat_map(|f| f.sources().iter().copied()).collect();
    if policy == MissingPolicy::AllModalities {
        required.extend(available_sources(manifest));
    }
    required.sort();
    required.dedup();

    let layout = if required.contains(&Source::Eeg) {
        Some(ScalpLayout::for_manifest(manifest)?)
    } else {
        None
    };
    let provider_id = provider.id();
    let hashes: Vec<String> = families
        .iter()
        .map(|f| f.config_hash(cfg, manifest.eeg_raw, &provider_id))
        .collect();
    let scale = (manifest.rating_scale.min, manifest.rating_scale.max);

    let refs: Vec<TrialRef<'_>> = manifest.trials().collect();
    // (features or skip reason, cache hits, cache misses)
    type Extracted = (std::result::Result<TrialFeatures, SkippedTrial>, usize, usize);
    let results: Vec<Result<Extracted>> = refs
        .par_iter()
        .map(|t| {
            let key = t.key();
            if let Some(s) = required.iter().find(|s| !has_source(t, **s)) {
                return Ok((
                    Err(SkippedTrial {
                        key,
                        reason: format!("missing {s}"),
                    }),
                    0,
                    0,
                ));
            }
            let mut inp = Inputs {
                t: *t,
                eeg: None,
                cardiac: None,
                gsr: None,
                faces: None,
            };
            let (mut hits, mut misses) = (0, 0);
            let mut blocks = Vec::new();
            let mut sequence = None;
            for (f, h) in families.iter().zip(&hashes) {
                if f.kind() == FamilyKind::Sequence {
                    sequence = Some(
                        compute_sequence(&mut inp, layout.as_ref(), cfg, provider)
                            .map_err(|e| e.context(key.clone()))?,
                    );
                    continue;
                }
                let cached = cache.and_then(|c| c.get(f.method(), h, &key));
                let block = match cached {
                    Some(b) => {
                        hits += 1;
                        b
                    }
                    None => {
                        misses += 1;
                        let b = compute_block(*f, &mut inp, layout.as_ref(), cfg, provider)
                            .map_err(|e| e.context(format!("{key} {}", f.method())))?;
                        if let Some(c) = cache {
                            c.put(f.method(), h, &key, &b);
                        }
                        b
                    }
                };
                blocks.push((*f, block));
            }
            Ok((
                Ok(TrialFeatures {
                    key,
                    dataset_id: manifest.dataset_id.clone(),
                    subject_id: t.subject.subject_id.clone(),
                    trial_id: t.trial.trial_id.clone(),
                    labels: t.labels(),
                    scale,
                    blocks,
                    sequence,
                }),
                hits,
                misses,
            ))
        })
        .collect();

    let mut ds = Dataset {
        id: manifest.dataset_id.clone(),
        trials: Vec::new(),
        skipped: Vec::new(),
        cache_hits: 0,
        cache_misses: 0,
    };
    for r in results {
        let (t, h, m) = r?;
        ds.cache_hits += h;
        ds.cache_misses += m;
        match t {
            Ok(t) => ds.trials.push(t),
            Err(s) => ds.skipped.push(s),
        }
    }
    Ok(ds)
}

/// Fails unless every trial carries the same blocks with the same names
/// and the same sequence width.
pub fn check_consistency<'a>(trials: impl IntoIterator<Item = &'a TrialFeatures>) -> Result<()> {
    let mut it = trials.into_iter();
    let Some(first) = it.next() else {
        return Ok(());
    };
    for t in it {
        if t.blocks.len() != first.blocks.len() {
            return Err(Error::FeatureSetMismatch {
                block: "*".into(),
                detail: format!(
                    "{} has {} blocks, {} has {}",
                    first.key,
                    first.blocks.len(),
                    t.key,
                    t.blocks.len()
                ),
            });
        }
        for ((fa, a), (fb, b)) in first.blocks.iter().zip(&t.blocks) {
            if fa != fb {
                return Err(Error::FeatureSetMismatch {
                    block: a.method.clone(),
                    detail: format!("{} has {} where {} has {}", t.key, b.method, first.key, a.method),
                });
            }
            if a.names != b.names {
                let detail = if a.len() != b.len() {
                    format!("{} has {} features, {} has {}", first.key, a.len(), t.key, b.len())
                } else {
                    format!("feature names differ between {} and {}", first.key, t.key)
                };
                return Err(Error::FeatureSetMismatch {
                    block: a.method.clone(),
                    detail,
                });
            }
        }
        let width = |s: &Option<Vec<Vec<f64>>>| s.as_ref().and_then(|r| r.first()).map(Vec::len);
        if width(&first.sequence) != width(&t.sequence) {
            return Err(Error::FeatureSetMismatch {
                block: Family::EegFaceSequence.method().into(),
                detail: format!("per-second width differs between {} and {}", first.key, t.key),
            });
        }
    }
    Ok(())
}
