//! Canonical in-memory types shared by every extractor, plus dataset
//! manifests and the on-disk signal/landmark formats.

mod io;
mod labels;
mod manifest;

pub use io::{
    parse_landmark_csv, parse_signal_csv, read_landmark_csv, read_signal_csv, write_landmark_csv, write_signal_csv,
};
pub use labels::{binarize, emotion_class, ClassLabel, EmotionClass, TrialLabels};
pub use manifest::{
    load_manifest, load_manifest_with_warnings, DatasetManifest, RatingScale, RawLabels, SubjectEntry, TrialEntry,
    TrialRef,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of landmarks per face frame.
pub const LANDMARK_COUNT: usize = 49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "EEG")]
    Eeg,
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "PPG")]
    Ppg,
    #[serde(rename = "GSR")]
    Gsr,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Eeg, Modality::Ecg, Modality::Ppg, Modality::Gsr];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Eeg => "EEG",
            Modality::Ecg => "ECG",
            Modality::Ppg => "PPG",
            Modality::Gsr => "GSR",
        }
    }

    pub fn is_cardiac(self) -> bool {
        matches!(self, Modality::Ecg | Modality::Ppg)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One modality's multi-channel recording for one stimulus presentation.
///
/// Samples are stored channel-major: `samples[c][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecording {
    pub trial_id: String,
    pub subject_id: String,
    pub modality: Modality,
    pub channels: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub fs: f64,
}

impl TrialRecording {
    /// Builds a recording, checking every structural invariant.
    pub fn new(
        trial_id: impl Into<String>,
        subject_id: impl Into<String>,
        modality: Modality,
        channels: Vec<String>,
        samples: Vec<Vec<f64>>,
        fs: f64,
    ) -> Result<Self> {
        let rec = TrialRecording {
            trial_id: trial_id.into(),
            subject_id: subject_id.into(),
            modality,
            channels,
            samples,
            fs,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidSignal(format!("sampling rate {} must be > 0", self.fs)));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidSignal("no channels".into()));
        }
        if self.channels.len() != self.samples.len() {
            return Err(Error::InvalidSignal(format!(
                "{} channel names for {} channels",
                self.channels.len(),
                self.samples.len()
            )));
        }
        let n = self.samples[0].len();
        for (name, ch) in self.channels.iter().zip(&self.samples) {
            if ch.len() != n {
                return Err(Error::InvalidSignal(format!(
                    "channel {name} has {} samples, expected {n}",
                    ch.len()
                )));
            }
            if let Some(pos) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidSignal(format!(
                    "non-finite sample in channel {name} at index {pos}"
                )));
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    /// Copy of the samples in `[start, end)` for every channel.
    pub fn slice(&self, start: usize, end: usize) -> TrialRecording {
        TrialRecording {
            trial_id: self.trial_id.clone(),
            subject_id: self.subject_id.clone(),
            modality: self.modality,
            channels: self.channels.clone(),
            samples: self.samples.iter().map(|c| c[start..end].to_vec()).collect(),
            fs: self.fs,
        }
    }
}

/// Face bounding box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub t: f64,
    pub points: Vec<[f64; 2]>,
    pub face_box: FaceBox,
}

/// Precomputed 49-point landmark track for one trial's frontal video.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceLandmarkTrack {
    pub trial_id: String,
    pub frames: Vec<LandmarkFrame>,
}

impl FaceLandmarkTrack {
    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, f) in self.frames.iter().enumerate() {
            if f.points.len() != LANDMARK_COUNT {
                return Err(Error::InvalidSignal(format!(
                    "frame {i}: {} landmarks, expected {LANDMARK_COUNT}",
                    f.points.len()
                )));
            }
            if !(f.face_box.w > 0.0 && f.face_box.h > 0.0) {
                return Err(Error::InvalidSignal(format!("frame {i}: degenerate face box")));
            }
            if !(f.t > prev) {
                return Err(Error::InvalidSignal(format!(
                    "frame {i}: timestamps must be strictly increasing"
                )));
            }
            prev = f.t;
        }
        Ok(())
    }
}

/// A named, ordered feature vector with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub trial_id: String,
    pub modality: String,
    pub method: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureBlock {
    pub fn new(
        trial_id: impl Into<String>,
        modality: impl Into<String>,
        method: impl Into<String>,
        names: Vec<String>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(names.len(), values.len());
        FeatureBlock {
            trial_id: trial_id.into(),
            modality: modality.into(),
            method: method.into(),
            names,
            values,
        }
    }

    /// Block with generated names `<prefix>_<i>`.
    pub fn indexed(
        trial_id: impl Into<String>,
        modality: impl Into<String>,
        method: impl Into<String>,
        prefix: &str,
        values: Vec<f64>,
    ) -> Self {
        let names = (0..values.len()).map(|i| format!("{prefix}_{i}")).collect();
        Self::new(trial_id, modality, method, names, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
