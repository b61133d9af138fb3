//! Galvanic skin response: eight time-domain statistics and the 0–2 Hz
//! spectrogram image features.

use crate::data::{FeatureBlock, Modality, TrialRecording};
use crate::dsp::{
    detect_peaks, diff_moments, min_max_scale, moving_average, percentile, stft_spectrogram, DiffMoments,
};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::image::{spectrogram_image, RgbImage};
use crate::learn::PcaModel;

pub const SPECTROGRAM_FMAX: f64 = 2.0;
pub const STAT_NAMES: [&str; 8] = [
    "peak_count",
    "mean_abs_peak_height",
    "mean",
    "std",
    "mean_abs_d1",
    "mean_abs_d1_norm",
    "mean_abs_d2",
    "mean_abs_d2_norm",
];

fn check(trial: &TrialRecording) -> Result<&[f64]> {
    if trial.modality != Modality::Gsr {
        return Err(Error::InvalidSignal(format!("expected GSR, got {}", trial.modality)));
    }
    if trial.n_channels() != 1 {
        return Err(Error::InvalidSignal(format!(
            "expected a single GSR channel, got {}",
            trial.n_channels()
        )));
    }
    Ok(&trial.samples[0])
}

/// Peak count, mean peak height over the 10th-percentile baseline, and the
/// six difference moments, all on the 0.25 s smoothed signal.
pub fn gsr_stat_features(trial: &TrialRecording) -> Result<FeatureBlock> {
    let x = check(trial)?;
    let needed = (3.0 * trial.fs).ceil() as usize;
    if x.len() < needed {
        return Err(Error::TooShort { needed, got: x.len() });
    }
    let smooth = moving_average(x, trial.fs, 0.25)?;
    let peaks = match min_max_scale(&smooth) {
        Ok(scaled) => detect_peaks(&scaled, trial.fs, 1.0, 0.1)?,
        Err(Error::ConstantSignal) => Vec::new(),
        Err(e) => return Err(e),
    };
    let baseline = percentile(&smooth, 10.0);
    let mean_height = if peaks.is_empty() {
        0.0
    } else {
        peaks.iter().map(|&p| (smooth[p] - baseline).abs()).sum::<f64>() / peaks.len() as f64
    };
    let moments: DiffMoments = diff_moments(&smooth)?;
    let mut values = vec![peaks.len() as f64, mean_height];
    values.extend(moments.to_vec());
    Ok(FeatureBlock::new(
        trial.trial_id.clone(),
        "GSR",
        "gsr_stats",
        STAT_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    ))
}

pub fn gsr_spectrogram_image(trial: &TrialRecording) -> Result<RgbImage> {
    let x = check(trial)?;
    let m = stft_spectrogram(
        x,
        trial.fs,
        SPECTROGRAM_FMAX,
        crate::cardiac::SPECTROGRAM_WIN_S,
        crate::cardiac::SPECTROGRAM_HOP_S,
    )?;
    Ok(spectrogram_image(&m))
}

pub fn gsr_embedding(trial: &TrialRecording, provider: &dyn EmbeddingProvider) -> Result<Vec<f64>> {
    let img = gsr_spectrogram_image(trial)?;
    provider
        .embed(&img)
        .map_err(|e| e.context(format!("trial {}", trial.trial_id)))
}

/// The eight statistics followed by the PCA-reduced spectrogram embedding.
pub fn gsr_features(trial: &TrialRecording, provider: &dyn EmbeddingProvider, pca: &PcaModel) -> Result<FeatureBlock> {
    let mut block = gsr_stat_features(trial)?;
    let z = pca.transform(&gsr_embedding(trial, provider)?)?;
    block.names.extend((0..z.len()).map(|i| format!("gsr_deep_{i}")));
    block.values.extend(z);
    block.method = "gsr".into();
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::StubProvider;
    use crate::image::spectrogram_raster;
    use crate::learn::pca_fit;
    use std::f64::consts::PI;

    fn rec(x: Vec<f64>, fs: f64) -> TrialRecording {
        TrialRecording::new("g", "s", Modality::Gsr, vec!["gsr".into()], vec![x], fs).unwrap()
    }

    fn bumps(fs: f64) -> Vec<f64> {
        (0..(60.0 * fs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                0.3 * (-(t - 15.0f64).powi(2) / 2.0).exp() + 0.5 * (-(t - 40.0f64).powi(2) / 2.0).exp()
            })
            .collect()
    }

    #[test]
    fn constant_signal() {
        let b = gsr_stat_features(&rec(vec![2.5; 400], 32.0)).unwrap();
        assert_eq!(b.values, vec![0.0, 0.0, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_bumps() {
        let b = gsr_stat_features(&rec(bumps(32.0), 32.0)).unwrap();
        assert_eq!(b.len(), 8);
        assert_eq!(b.values[0], 2.0);
        assert!((b.values[1] - 0.4).abs() < 0.01, "{}", b.values[1]);
    }

    #[test]
    fn offset_invariance_of_peak_features() {
        let a = gsr_stat_features(&rec(bumps(32.0), 32.0)).unwrap();
        let b = gsr_stat_features(&rec(bumps(32.0).iter().map(|v| v + 7.0).collect(), 32.0)).unwrap();
        assert_eq!(a.values[0], b.values[0]);
        assert!((a.values[1] - b.values[1]).abs() < 1e-9);
        assert!((a.values[5] - b.values[5]).abs() < 1e-9);
    }

    #[test]
    fn too_short_and_multichannel() {
        assert!(matches!(
            gsr_stat_features(&rec(vec![1.0; 50], 32.0)),
            Err(Error::TooShort { .. })
        ));
        let two = TrialRecording::new(
            "g",
            "s",
            Modality::Gsr,
            vec!["a".into(), "b".into()],
            vec![vec![0.0; 200]; 2],
            32.0,
        )
        .unwrap();
        assert!(gsr_stat_features(&two).is_err());
    }

    #[test]
    fn half_hz_modulation_brightest_row() {
        let fs = 32.0;
        let x: Vec<f64> = (0..(fs as usize * 40))
            .map(|i| 1.0 + 0.2 * (2.0 * PI * 0.5 * i as f64 / fs).sin())
            .collect();
        let m = stft_spectrogram(&x, fs, SPECTROGRAM_FMAX, 4.0, 0.5).unwrap();
        let img = spectrogram_raster(&m);
        let target = m.freq_axis.iter().position(|&f| (f - 0.5).abs() < 1e-9).unwrap();
        for x in 0..img.width {
            let y = (0..img.height)
                .max_by_key(|&y| img.get(x, y).iter().map(|&c| c as u32).sum::<u32>())
                .unwrap();
            assert_eq!(m.n_bins() - 1 - y, target);
        }
    }

    #[test]
    fn combined_block_is_38() {
        let fake: Vec<Vec<f64>> = (0..35)
            .map(|i| (0..4096).map(|j| ((i * 13 + j * 7) % 89) as f64).collect())
            .collect();
        let pca = pca_fit(&fake, 30).unwrap();
        let t = rec(bumps(32.0), 32.0);
        let b = gsr_features(&t, &StubProvider::new(2), &pca).unwrap();
        assert_eq!(b.len(), 38);
        assert_eq!(b, gsr_features(&t.clone(), &StubProvider::new(2), &pca).unwrap());
    }
}
