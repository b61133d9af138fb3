//! Heart rate, RR intervals and pNN50 from ECG or PPG, plus the 0–5 Hz
//! spectrogram image features.

use serde::{Deserialize, Serialize};

use crate::data::{FeatureBlock, TrialRecording};
use crate::dsp::{detect_peaks, min_max_scale, moving_average, stft_spectrogram};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::image::{spectrogram_image, RgbImage};
use crate::learn::PcaModel;

pub const SPECTROGRAM_FMAX: f64 = 5.0;
pub const SPECTROGRAM_WIN_S: f64 = 4.0;
pub const SPECTROGRAM_HOP_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    pub intervals: Vec<f64>,
    pub source_channel: String,
}

fn check(trial: &TrialRecording, channel: usize) -> Result<()> {
    if !trial.modality.is_cardiac() {
        return Err(Error::InvalidSignal(format!(
            "expected ECG or PPG, got {}",
            trial.modality
        )));
    }
    if channel >= trial.n_channels() {
        return Err(Error::InvalidParameter(format!(
            "channel {channel} out of range for {} channels",
            trial.n_channels()
        )));
    }
    Ok(())
}

/// Beat locations: 0.25 s moving average, scaling to [0, 1], then peaks
/// at least 0.5 s apart and at least half the range tall.
pub fn cardiac_peaks(trial: &TrialRecording, channel: usize) -> Result<Vec<usize>> {
    check(trial, channel)?;
    let smooth = moving_average(&trial.samples[channel], trial.fs, 0.25)?;
    let scaled = min_max_scale(&smooth)?;
    detect_peaks(&scaled, trial.fs, 0.5, 0.5)
}

pub fn rr_series(peaks: &[usize], fs: f64, source_channel: &str) -> RrSeries {
    RrSeries {
        intervals: peaks.windows(2).map(|w| (w[1] - w[0]) as f64 / fs).collect(),
        source_channel: source_channel.to_string(),
    }
}

/// Beats per minute over the whole recording.
pub fn heart_rate(n_peaks: usize, duration_s: f64) -> f64 {
    n_peaks as f64 * 60.0 / duration_s
}

/// Percentage of successive RR differences strictly above 50 ms.
/// Differences within a nanosecond of 50 ms count as exactly 50 ms.
pub fn pnn50(rr: &[f64]) -> Result<f64> {
    if rr.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: rr.len(),
        });
    }
    let over = rr.windows(2).filter(|w| (w[1] - w[0]).abs() > 0.050 + 1e-9).count();
    Ok(100.0 * over as f64 / (rr.len() - 1) as f64)
}

/// `[HR, pNN50]` for every channel, concatenated in channel order.
pub fn cardiac_hrv_features(trial: &TrialRecording) -> Result<FeatureBlock> {
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (c, name) in trial.channels.iter().enumerate() {
        let ctx = |e: Error| e.context(format!("{} channel {name}", trial.trial_id));
        let peaks = cardiac_peaks(trial, c).map_err(ctx)?;
        let rr = rr_series(&peaks, trial.fs, name);
        names.push(format!("hr_{name}"));
        values.push(heart_rate(peaks.len(), trial.duration_s()));
        names.push(format!("pnn50_{name}"));
        values.push(pnn50(&rr.intervals).map_err(ctx)?);
    }
    Ok(FeatureBlock::new(
        trial.trial_id.clone(),
        trial.modality.as_str(),
        "cardiac_hrv",
        names,
        values,
    ))
}

/// 0–5 Hz log-power spectrogram in Parula, 224×224.
pub fn cardiac_spectrogram_image(trial: &TrialRecording, channel: usize) -> Result<RgbImage> {
    check(trial, channel)?;
    if trial.fs <= 2.0 * SPECTROGRAM_FMAX {
        return Err(Error::InvalidParameter(format!(
            "fs {} Hz too low for a {SPECTROGRAM_FMAX} Hz spectrogram",
            trial.fs
        )));
    }
    let m = stft_spectrogram(
        &trial.samples[channel],
        trial.fs,
        SPECTROGRAM_FMAX,
        SPECTROGRAM_WIN_S,
        SPECTROGRAM_HOP_S,
    )?;
    Ok(spectrogram_image(&m))
}

/// Provider embedding of the first channel's spectrogram.
pub fn cardiac_embedding(trial: &TrialRecording, provider: &dyn EmbeddingProvider) -> Result<Vec<f64>> {
    let img = cardiac_spectrogram_image(trial, 0)?;
    provider
        .embed(&img)
        .map_err(|e| e.context(format!("trial {}", trial.trial_id)))
}

/// HRV block followed by the PCA-reduced spectrogram embedding.
pub fn cardiac_features(
    trial: &TrialRecording,
    provider: &dyn EmbeddingProvider,
    pca: &PcaModel,
) -> Result<FeatureBlock> {
    let mut block = cardiac_hrv_features(trial)?;
    let z = pca.transform(&cardiac_embedding(trial, provider)?)?;
    block.names.extend((0..z.len()).map(|i| format!("cardiac_deep_{i}")));
    block.values.extend(z);
    block.method = "cardiac".into();
    Ok(block)
}
