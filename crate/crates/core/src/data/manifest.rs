use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::{read_landmark_csv, read_signal_csv};
use super::labels::TrialLabels;
use super::{FaceLandmarkTrack, Modality, TrialRecording};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.min && r <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawLabels {
    pub valence: f64,
    pub arousal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub liking: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub trial_id: String,
    pub labels: RawLabels,
    /// Modality → signal CSV path. An absent modality is simply not listed.
    #[serde(default)]
    pub files: BTreeMap<Modality, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<String>,
    /// Face crops (PNG), one per sampled video frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub face_frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub trials: Vec<TrialEntry>,
}

/// A dataset description. All paths are relative to the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub rating_scale: RatingScale,
    pub sampling_rates: BTreeMap<Modality, f64>,
    /// Channel names per modality, in CSV column order.
    pub channels: BTreeMap<Modality, Vec<String>>,
    /// Path to a layout JSON, or `builtin:32` / `builtin:14`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalp_layout_ref: Option<String>,
    /// EEG is unfiltered and gets a 4–45 Hz band-pass before extraction.
    #[serde(default)]
    pub eeg_raw: bool,
    #[serde(default)]
    pub notes: String,
    pub subjects: Vec<SubjectEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

/// Borrowed view of one trial within a manifest.
#[derive(Debug, Clone, Copy)]
pub struct TrialRef<'a> {
    pub manifest: &'a DatasetManifest,
    pub subject: &'a SubjectEntry,
    pub trial: &'a TrialEntry,
}

impl<'a> TrialRef<'a> {
    /// `dataset/subject/trial`, unique across manifests with distinct ids.
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}",
            self.manifest.dataset_id, self.subject.subject_id, self.trial.trial_id
        )
    }

    pub fn labels(&self) -> TrialLabels {
        TrialLabels {
            valence: self.trial.labels.valence,
            arousal: self.trial.labels.arousal,
            liking: self.trial.labels.liking,
            scale_midpoint: self.manifest.rating_scale.midpoint(),
        }
    }

    pub fn has(&self, modality: Modality) -> bool {
        self.trial.files.contains_key(&modality)
    }

    /// Loads one modality; `Ok(None)` when the trial has no such recording.
    pub fn load(&self, modality: Modality) -> Result<Option<TrialRecording>> {
        let Some(rel) = self.trial.files.get(&modality) else {
            return Ok(None);
        };
        let path = self.manifest.root.join(rel);
        let samples = read_signal_csv(&path)?;
        let channels = self
            .manifest
            .channels
            .get(&modality)
            .cloned()
            .ok_or_else(|| Error::InvalidManifest(format!("no channel list for {modality}")))?;
        if channels.len() != samples.len() {
            return Err(Error::InvalidSignal(format!(
                "{}: {} columns but manifest lists {} {modality} channels",
                path.display(),
                samples.len(),
                channels.len()
            )));
        }
        let fs = self.manifest.sampling_rates[&modality];
        TrialRecording::new(
            self.trial.trial_id.clone(),
            self.subject.subject_id.clone(),
            modality,
            channels,
            samples,
            fs,
        )
        .map(Some)
    }

    pub fn load_landmarks(&self) -> Result<Option<FaceLandmarkTrack>> {
        match &self.trial.landmarks {
            None => Ok(None),
            Some(rel) => read_landmark_csv(&self.trial.trial_id, &self.manifest.root.join(rel)).map(Some),
        }
    }

    pub fn face_frame_paths(&self) -> Vec<PathBuf> {
        self.trial
            .face_frames
            .iter()
            .map(|p| self.manifest.root.join(p))
            .collect()
    }
}

impl DatasetManifest {
    /// Parses manifest JSON without touching the filesystem.
    pub fn from_json(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut m: DatasetManifest = serde_json::from_str(text).map_err(|e| Error::parse("manifest", e.to_string()))?;
        m.root = root.into();
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn trials(&self) -> impl Iterator<Item = TrialRef<'_>> {
        self.subjects.iter().flat_map(move |s| {
            s.trials.iter().map(move |t| TrialRef {
                manifest: self,
                subject: s,
                trial: t,
            })
        })
    }

    pub fn n_trials(&self) -> usize {
        self.subjects.iter().map(|s| s.trials.len()).sum()
    }

    /// Checks structural invariants. With `check_files`, also requires every
    /// referenced file to exist. Returns non-fatal warnings.
    pub fn validate(&self, check_files: bool) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let scale = self.rating_scale;
        if !(scale.min.is_finite() && scale.max.is_finite() && scale.min < scale.max) {
            return Err(Error::InvalidManifest(format!(
                "rating scale min {} must be < max {}",
                scale.min, scale.max
            )));
        }
        for (m, fs) in &self.sampling_rates {
            if !(fs.is_finite() && *fs > 0.0) {
                return Err(Error::InvalidManifest(format!("sampling rate for {m} must be > 0")));
            }
        }
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::DuplicateSubject(s.subject_id.clone()));
            }
            if s.trials.is_empty() {
                warnings.push(format!("subject {} has no trials", s.subject_id));
            }
            let mut trial_ids = HashSet::new();
            for t in &s.trials {
                if !trial_ids.insert(t.trial_id.as_str()) {
                    return Err(Error::InvalidManifest(format!(
                        "duplicate trial id {} in subject {}",
                        t.trial_id, s.subject_id
                    )));
                }
                let l = &t.labels;
                for r in [Some(l.valence), Some(l.arousal), l.liking].into_iter().flatten() {
                    if !scale.contains(r) {
                        return Err(Error::RatingOutOfScale {
                            rating: r,
                            min: scale.min,
                            max: scale.max,
                        });
                    }
                }
                for m in t.files.keys() {
                    if !self.sampling_rates.contains_key(m) {
                        return Err(Error::InvalidManifest(format!("no sampling rate for {m}")));
                    }
                    if !self.channels.get(m).is_some_and(|c| !c.is_empty()) {
                        return Err(Error::InvalidManifest(format!("no channel list for {m}")));
                    }
                }
                if t.files.is_empty() && t.landmarks.is_none() && t.face_frames.is_empty() {
                    warnings.push(format!("trial {}/{} has no data", s.subject_id, t.trial_id));
                }
                if check_files {
                    let refs = t.files.values().chain(t.landmarks.iter()).chain(t.face_frames.iter());
                    for rel in refs {
                        let p = self.root.join(rel);
                        if !p.is_file() {
                            return Err(Error::MissingTrialFile(p));
                        }
                    }
                }
            }
        }
        if check_files {
            if let Some(layout) = &self.scalp_layout_ref {
                if !layout.starts_with("builtin:") {
                    let p = self.root.join(layout);
                    if !p.is_file() {
                        return Err(Error::MissingTrialFile(p));
                    }
                }
            }
        }
        let has_eeg = self
            .subjects
            .iter()
            .flat_map(|s| &s.trials)
            .any(|t| t.files.contains_key(&Modality::Eeg));
        if has_eeg && self.scalp_layout_ref.is_none() {
            warnings.push("EEG present but no scalp layout referenced".into());
        }
        Ok(warnings)
    }
}

/// Loads and fully validates a manifest, returning warnings alongside.
pub fn load_manifest_with_warnings(path: &Path) -> Result<(DatasetManifest, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = DatasetManifest::from_json(&text, root)?;
    let warnings = manifest.validate(true)?;
    Ok((manifest, warnings))
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let (m, warnings) = load_manifest_with_warnings(path)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(m)
}
