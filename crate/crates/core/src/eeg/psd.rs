use serde::{Deserialize, Serialize};

use crate::data::{FeatureBlock, Modality, TrialRecording};
use crate::dsp::{bandpass, eeg_bands, welch_psd};
use crate::error::{Error, Result};
use crate::layout::ScalpLayout;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsdConfig {
    pub win_s: f64,
    pub hop_s: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        PsdConfig { win_s: 1.0, hop_s: 0.5 }
    }
}

/// Band-pass every channel to 4–45 Hz when `raw`, otherwise a copy.
pub fn preprocess_eeg(trial: &TrialRecording, raw: bool) -> Result<TrialRecording> {
    let mut out = trial.clone();
    if raw {
        for ch in &mut out.samples {
            *ch = bandpass(ch, trial.fs, 4.0, 45.0)?;
        }
    }
    Ok(out)
}

fn check_eeg(trial: &TrialRecording) -> Result<()> {
    if trial.modality != Modality::Eeg {
        return Err(Error::InvalidSignal(format!("expected EEG, got {}", trial.modality)));
    }
    Ok(())
}

/// `[theta, alpha, beta]` power per channel.
pub fn band_powers(trial: &TrialRecording, cfg: &PsdConfig) -> Result<Vec<[f64; 3]>> {
    check_eeg(trial)?;
    let bands = eeg_bands();
    trial
        .samples
        .iter()
        .zip(&trial.channels)
        .map(|(ch, name)| {
            let psd =
                welch_psd(ch, trial.fs, cfg.win_s, cfg.hop_s).map_err(|e| e.context(format!("channel {name}")))?;
            Ok([0, 1, 2].map(|b| psd.band_power(&bands[b])))
        })
        .collect()
}

/// Band powers ordered band-major: all theta values, then alpha, then beta,
/// each in channel order. Every channel must be known to `layout`.
pub fn band_psd_features(trial: &TrialRecording, layout: &ScalpLayout, cfg: &PsdConfig) -> Result<FeatureBlock> {
    check_eeg(trial)?;
    layout.resolve(&trial.channels)?;
    let powers = band_powers(trial, cfg)?;
    let bands = eeg_bands();
    let mut names = Vec::with_capacity(3 * powers.len());
    let mut values = Vec::with_capacity(3 * powers.len());
    for (b, band) in bands.iter().enumerate() {
        for (ch, p) in trial.channels.iter().zip(&powers) {
            names.push(format!("{}_{}", band.name, ch));
            values.push(p[b]);
        }
    }
    Ok(FeatureBlock::new(
        trial.trial_id.clone(),
        "EEG",
        "eeg_psd",
        names,
        values,
    ))
}
