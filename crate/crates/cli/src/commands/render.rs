use std::path::Path;

use affectlab::cardiac::cardiac_spectrogram_image;
use affectlab::data::{Modality, TrialRef};
use affectlab::eeg::{per_second_eeg_images, preprocess_eeg, trial_topo_image, PsdConfig, TOPO_GRID};
use affectlab::gsr::gsr_spectrogram_image;
use affectlab::image::RgbImage;
use affectlab::layout::ScalpLayout;
use anyhow::{Context, Result};
use rayon::prelude::*;

use super::load_manifests;
use crate::RenderArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Topo,
    TopoPerSecond,
    Cardiac,
    Gsr,
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    img.save_png(path)?;
    Ok(())
}

fn render_trial(t: &TrialRef<'_>, kinds: &[Kind], layout: Option<&ScalpLayout>, out: &Path) -> Result<usize> {
    let base = out.join(&t.manifest.dataset_id).join(&t.subject.subject_id);
    let id = &t.trial.trial_id;
    let mut written = 0;
    let wants = |k: Kind| kinds.contains(&k);
    if wants(Kind::Topo) || wants(Kind::TopoPerSecond) {
        match (t.load(Modality::Eeg)?, layout) {
            (Some(rec), Some(layout)) => {
                let eeg = preprocess_eeg(&rec, t.manifest.eeg_raw)?;
                if wants(Kind::Topo) {
                    save(
                        &trial_topo_image(&eeg, layout, &PsdConfig::default(), TOPO_GRID)?,
                        &base.join(format!("{id}_topo.png")),
                    )?;
                    written += 1;
                }
                if wants(Kind::TopoPerSecond) {
                    for (s, img) in per_second_eeg_images(&eeg, layout, TOPO_GRID)?.iter().enumerate() {
                        save(img, &base.join(format!("{id}_topo")).join(format!("{s:03}.png")))?;
                        written += 1;
                    }
                }
            }
            _ => log::info!("{}: no EEG, topography skipped", t.key()),
        }
    }
    if wants(Kind::Cardiac) {
        let rec = match t.load(Modality::Ecg)? {
            Some(r) => Some(r),
            None => t.load(Modality::Ppg)?,
        };
        match rec {
            Some(rec) => {
                save(
                    &cardiac_spectrogram_image(&rec, 0)?,
                    &base.join(format!("{id}_cardiac.png")),
                )?;
                written += 1;
            }
            None => log::info!("{}: no ECG/PPG, cardiac spectrogram skipped", t.key()),
        }
    }
    if wants(Kind::Gsr) {
        match t.load(Modality::Gsr)? {
            Some(rec) => {
                save(&gsr_spectrogram_image(&rec)?, &base.join(format!("{id}_gsr.png")))?;
                written += 1;
            }
            None => log::info!("{}: no GSR, GSR spectrogram skipped", t.key()),
        }
    }
    Ok(written)
}

pub fn run(a: &RenderArgs) -> Result<()> {
    let manifest = load_manifests(std::slice::from_ref(&a.manifest))?.remove(0);
    let kinds = if a.kinds.is_empty() {
        vec![Kind::Topo, Kind::Cardiac, Kind::Gsr]
    } else {
        a.kinds.clone()
    };
    let selected: Vec<TrialRef<'_>> = manifest
        .trials()
        .filter(|t| a.subjects.is_empty() || a.subjects.contains(&t.subject.subject_id))
        .filter(|t| a.trials.is_empty() || a.trials.contains(&t.trial.trial_id))
        .collect();
    if selected.is_empty() {
        eprintln!("nothing selected; no files written");
        return Ok(());
    }
    let needs_eeg = kinds.iter().any(|k| matches!(k, Kind::Topo | Kind::TopoPerSecond));
    let layout = if needs_eeg && manifest.channels.contains_key(&Modality::Eeg) {
        Some(ScalpLayout::for_manifest(&manifest)?)
    } else {
        None
    };
    let written: usize = selected
        .par_iter()
        .map(|t| render_trial(t, &kinds, layout.as_ref(), &a.out).with_context(|| format!("rendering {}", t.key())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    println!(
        "wrote {written} image(s) for {} trial(s) under {}",
        selected.len(),
        a.out.display()
    );
    Ok(())
}
