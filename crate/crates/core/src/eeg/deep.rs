use super::psd::{band_powers, PsdConfig};
use super::topo::{compose_rgb_topo, render_topo_band};
use crate::data::{FeatureBlock, TrialRecording};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::image::{RgbImage, EMBED_SIZE};
use crate::layout::ScalpLayout;
use crate::learn::PcaModel;

/// RGB topography from per-channel `[theta, alpha, beta]` powers laid out
/// like `layout`.
pub fn topo_from_powers(powers: &[[f64; 3]], layout: &ScalpLayout, grid: usize) -> Result<RgbImage> {
    let mut imgs = Vec::with_capacity(3);
    let mut maxima = [0.0; 3];
    for b in 0..3 {
        let v: Vec<f64> = powers.iter().map(|p| p[b]).collect();
        maxima[b] = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        imgs.push(render_topo_band(&v, layout, grid)?);
    }
    compose_rgb_topo(&imgs[0], &imgs[1], &imgs[2], maxima)
}

/// Whole-trial topography at `grid × grid`.
pub fn trial_topo_image(
    trial: &TrialRecording,
    layout: &ScalpLayout,
    cfg: &PsdConfig,
    grid: usize,
) -> Result<RgbImage> {
    let sub = layout.subset(&trial.channels)?;
    topo_from_powers(&band_powers(trial, cfg)?, &sub, grid)
}

/// One topography per whole second of the trial, each from that second
/// alone.
pub fn per_second_eeg_images(trial: &TrialRecording, layout: &ScalpLayout, grid: usize) -> Result<Vec<RgbImage>> {
    let per = trial.fs.round() as usize;
    let seconds = trial.n_samples() / per.max(1);
    if seconds == 0 {
        return Err(Error::TooShort {
            needed: per,
            got: trial.n_samples(),
        });
    }
    let sub = layout.subset(&trial.channels)?;
    let cfg = PsdConfig { win_s: 1.0, hop_s: 1.0 };
    (0..seconds)
        .map(|s| {
            let piece = trial.slice(s * per, (s + 1) * per);
            topo_from_powers(&band_powers(&piece, &cfg)?, &sub, grid)
                .map_err(|e| e.context(format!("{} second {s}", trial.trial_id)))
        })
        .collect()
}

/// Provider embedding of the whole-trial topography, resized for the
/// provider.
pub fn eeg_topo_embedding(
    trial: &TrialRecording,
    layout: &ScalpLayout,
    provider: &dyn EmbeddingProvider,
    grid: usize,
) -> Result<Vec<f64>> {
    let img = trial_topo_image(trial, layout, &PsdConfig::default(), grid)?.resize_bilinear(EMBED_SIZE, EMBED_SIZE);
    provider
        .embed(&img)
        .map_err(|e| e.context(format!("trial {}", trial.trial_id)))
}

/// Topography → embedding → PCA.
pub fn eeg_deep_features(
    trial: &TrialRecording,
    layout: &ScalpLayout,
    provider: &dyn EmbeddingProvider,
    pca: &PcaModel,
    grid: usize,
) -> Result<FeatureBlock> {
    let emb = eeg_topo_embedding(trial, layout, provider, grid)?;
    let z = pca.transform(&emb)?;
    Ok(FeatureBlock::indexed(
        trial.trial_id.clone(),
        "EEG",
        "eeg_deep",
        "eeg_deep",
        z,
    ))
}
