//! Synthetic multi-modal datasets with planted class effects.
//!
//! Every trial gets a circumplex quadrant (balanced within each subject)
//! and ratings drawn on the matching side of the midpoint. Effects are
//! added only for the High side of their axis, scaled by `size`:
//!
//! - EEG: pink noise per channel, plus band-limited noise at a fixed
//!   electrode group whose std is `size` times the channel's noise std
//! - cardiac: +10·size bpm heart rate, or +30·size ms RR jitter
//! - GSR: SCR event rate multiplied by 1 + 2·size
//! - landmarks: mouth corners or brows raised by 3%·size of the face height

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{
    write_landmark_csv, write_signal_csv, DatasetManifest, FaceBox, FaceLandmarkTrack, LandmarkFrame, Modality,
    RatingScale, RawLabels, SubjectEntry, TrialEntry,
};
use crate::dsp::{bandpass, population_std};
use crate::error::{Error, Result};
use crate::face::template_face;
use crate::image::{RgbImage, EMBED_SIZE};
use crate::layout::{MONTAGE_14, MONTAGE_32};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Montage {
    #[serde(rename = "32")]
    M32,
    #[serde(rename = "14")]
    M14,
}

impl Montage {
    pub fn channels(self) -> &'static [&'static str] {
        match self {
            Montage::M32 => &MONTAGE_32,
            Montage::M14 => &MONTAGE_14,
        }
    }

    fn layout_ref(self) -> &'static str {
        match self {
            Montage::M32 => "builtin:32",
            Montage::M14 => "builtin:14",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectAxis {
    Valence,
    Arousal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectFeature {
    /// 4-8 Hz at fronto-central electrodes.
    EegTheta,
    /// 8-13 Hz at parieto-occipital electrodes.
    EegAlpha,
    /// 13-30 Hz at frontal electrodes.
    EegBeta,
    HeartRate,
    Hrv,
    ScrRate,
    Mouth,
    Brows,
}

impl EffectFeature {
    fn eeg_band(self) -> Option<((f64, f64), &'static [&'static str])> {
        match self {
            EffectFeature::EegTheta => Some(((4.0, 8.0), &["Fz", "FC1", "FC2", "F3", "F4", "AF3", "AF4"])),
            EffectFeature::EegAlpha => Some((
                (8.0, 13.0),
                &["O1", "O2", "Oz", "P7", "P8", "PO3", "PO4", "P3", "P4", "Pz"],
            )),
            EffectFeature::EegBeta => Some(((13.0, 30.0), &["F3", "F4", "AF3", "AF4", "F7", "F8", "FC5", "FC6"])),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedEffect {
    pub axis: EffectAxis,
    pub feature: EffectFeature,
    pub size: f64,
}

/// Which recordings to write.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthModalities {
    pub eeg: bool,
    /// `Some(Ppg)` writes one PPG channel, `Some(Ecg)` two ECG leads.
    pub cardiac: Option<Modality>,
    pub gsr: bool,
    pub landmarks: bool,
    /// One 224×224 face crop per second.
    pub face_frames: bool,
}

impl Default for SynthModalities {
    fn default() -> Self {
        SynthModalities {
            eeg: true,
            cardiac: Some(Modality::Ppg),
            gsr: true,
            landmarks: true,
            face_frames: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dataset_id: String,
    pub n_subjects: usize,
    pub trials_per_subject: usize,
    pub trial_length_s: f64,
    pub montage: Montage,
    pub effects: Vec<PlantedEffect>,
    pub modalities: SynthModalities,
    pub eeg_fs: f64,
    pub cardiac_fs: f64,
    pub gsr_fs: f64,
    pub landmark_fps: f64,
    /// Probability that any one recording file of a trial is left out.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dataset_id: "synth".into(),
            n_subjects: 10,
            trials_per_subject: 20,
            trial_length_s: 20.0,
            montage: Montage::M32,
            effects: default_effects(1.0),
            modalities: SynthModalities::default(),
            eeg_fs: 128.0,
            cardiac_fs: 128.0,
            gsr_fs: 32.0,
            landmark_fps: 5.0,
            missing_rate: 0.0,
            seed: 0,
        }
    }
}

/// Valence drives alpha, HRV and the mouth; arousal drives beta, heart
/// rate, SCR rate and the brows.
pub fn default_effects(size: f64) -> Vec<PlantedEffect> {
    use EffectAxis::*;
    use EffectFeature::*;
    [
        (Valence, EegAlpha),
        (Valence, Hrv),
        (Valence, Mouth),
        (Arousal, EegBeta),
        (Arousal, HeartRate),
        (Arousal, ScrRate),
        (Arousal, Brows),
    ]
    .iter()
    .map(|&(axis, feature)| PlantedEffect { axis, feature, size })
    .collect()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_subjects == 0 || self.trials_per_subject == 0 {
            return bad("need at least one subject and one trial".into());
        }
        if !(self.trial_length_s >= 10.0) {
            return bad(format!("trial length {} s must be >= 10 s", self.trial_length_s));
        }
        if let Some(e) = self.effects.iter().find(|e| !(e.size >= 0.0 && e.size.is_finite())) {
            return bad(format!("effect size {} must be >= 0", e.size));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing rate {} must be in [0, 1)", self.missing_rate));
        }
        for (name, fs) in [("EEG", self.eeg_fs), ("cardiac", self.cardiac_fs), ("GSR", self.gsr_fs)] {
            if !(fs >= 16.0) {
                return bad(format!("{name} sampling rate {fs} must be >= 16 Hz"));
            }
        }
        if self.modalities.eeg && self.eeg_fs <= 60.0 {
            return bad("EEG sampling rate must exceed 60 Hz".into());
        }
        if matches!(self.modalities.cardiac, Some(m) if !m.is_cardiac()) {
            return bad("cardiac modality must be ECG or PPG".into());
        }
        if !(self.landmark_fps > 0.0) {
            return bad("landmark fps must be > 0".into());
        }
        Ok(())
    }

    fn size(&self, feature: EffectFeature, high: (bool, bool)) -> f64 {
        self.effects
            .iter()
            .filter(|e| e.feature == feature)
            .filter(|e| match e.axis {
                EffectAxis::Valence => high.0,
                EffectAxis::Arousal => high.1,
            })
            .map(|e| e.size)
            .sum()
    }
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, 1.0).unwrap().sample(r)
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

/// 1/f noise by Kellet's filter bank over white Gaussian input.
fn pink_noise(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b = [0.0f64; 7];
    (0..n)
        .map(|_| {
            let w = normal(r);
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let out = b.iter().sum::<f64>() + w * 0.5362;
            b[6] = w * 0.115926;
            out
        })
        .collect()
}

struct Subject {
    gain: f64,
    channel_gain: Vec<f64>,
    hr: f64,
    face: FaceBox,
}

fn eeg_trial(cfg: &SynthConfig, subj: &Subject, high: (bool, bool), r: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let n = (cfg.trial_length_s * cfg.eeg_fs).round() as usize;
    let names = cfg.montage.channels();
    let mut out: Vec<Vec<f64>> = names
        .iter()
        .enumerate()
        .map(|(c, _)| {
            let g = 5.0 * subj.gain * subj.channel_gain[c];
            pink_noise(n, r).into_iter().map(|v| g * v).collect()
        })
        .collect();
    for feature in [EffectFeature::EegTheta, EffectFeature::EegAlpha, EffectFeature::EegBeta] {
        let size = cfg.size(feature, high);
        if size <= 0.0 {
            continue;
        }
        let ((lo, hi), group) = feature.eeg_band().expect("EEG feature");
        for (c, name) in names.iter().enumerate() {
            if !group.contains(name) {
                continue;
            }
            let white: Vec<f64> = (0..n).map(|_| normal(r)).collect();
            let band = bandpass(&white, cfg.eeg_fs, lo, hi)?;
            let scale = size * population_std(&out[c]) / population_std(&band).max(1e-12);
            for (o, b) in out[c].iter_mut().zip(band) {
                *o += scale * b;
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|ch| ch.into_iter().map(|v| round_to(v, 3)).collect())
        .collect())
}

fn cardiac_trial(
    cfg: &SynthConfig,
    subj: &Subject,
    high: (bool, bool),
    ecg: bool,
    r: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let fs = cfg.cardiac_fs;
    let n = (cfg.trial_length_s * fs).round() as usize;
    let hr = subj.hr + 2.0 * normal(r) + 10.0 * cfg.size(EffectFeature::HeartRate, high);
    let jitter = 0.015 + 0.03 * cfg.size(EffectFeature::Hrv, high);
    let rr = 60.0 / hr;
    let mut beats = Vec::new();
    let mut t = r.gen_range(0.2..0.2 + rr);
    while t < cfg.trial_length_s {
        beats.push(t);
        t += (rr + jitter * normal(r)).max(0.33);
    }
    let width = if ecg { 0.03 } else { 0.04 };
    let phase = r.gen_range(0.0..std::f64::consts::TAU);
    let leads = if ecg { 2 } else { 1 };
    (0..leads)
        .map(|lead| {
            let amp = if lead == 0 { 1.0 } else { 0.8 };
            let mut x: Vec<f64> = (0..n)
                .map(|i| {
                    let ti = i as f64 / fs;
                    0.05 * (std::f64::consts::TAU * 0.2 * ti + phase).sin() + 0.01 * normal(r)
                })
                .collect();
            for &b in &beats {
                let c = (b * fs).round() as i64;
                let span = (5.0 * width * fs).ceil() as i64;
                for i in (c - span).max(0)..(c + span + 1).min(n as i64) {
                    let d = i as f64 / fs - b;
                    x[i as usize] += amp * (-d * d / (2.0 * width * width)).exp();
                }
            }
            x.into_iter().map(|v| round_to(v, 4)).collect()
        })
        .collect()
}

fn gsr_trial(cfg: &SynthConfig, subj: &Subject, high: (bool, bool), r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let fs = cfg.gsr_fs;
    let len = cfg.trial_length_s;
    let n = (len * fs).round() as usize;
    let rate_per_s = 3.0 / 60.0 * (1.0 + 2.0 * cfg.size(EffectFeature::ScrRate, high));
    let count = Poisson::new(rate_per_s * len).unwrap().sample(r) as usize;
    let onsets: Vec<(f64, f64)> = (0..count)
        .map(|_| (r.gen_range(0.0..len - 2.0), r.gen_range(0.2..0.6)))
        .collect();
    let base = 2.0 * subj.gain;
    let phase = r.gen_range(0.0..std::f64::consts::TAU);
    // Rise 0.75 s, decay 4 s, normalised to unit peak.
    let shape = |d: f64| (1.0 - (-d / 0.75).exp()) * (-d / 4.0).exp();
    let peak = {
        let tp = 0.75 * (1.0f64 + 4.0 / 0.75).ln();
        shape(tp)
    };
    let drift = Exp::new(1.0).unwrap().sample(r) * 0.1;
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let mut v = base + 0.3 * (std::f64::consts::PI * t / len + phase).sin() + drift * t / len;
            for &(t0, a) in &onsets {
                if t >= t0 {
                    v += a * shape(t - t0) / peak;
                }
            }
            round_to(v + 0.005 * normal(r), 5)
        })
        .collect();
    vec![x]
}

fn landmark_track(
    cfg: &SynthConfig,
    trial_id: &str,
    subj: &Subject,
    high: (bool, bool),
    r: &mut ChaCha8Rng,
) -> FaceLandmarkTrack {
    let template = template_face();
    let b = subj.face;
    let mouth = 0.03 * cfg.size(EffectFeature::Mouth, high);
    let brows = 0.03 * cfg.size(EffectFeature::Brows, high);
    let n = (cfg.trial_length_s * cfg.landmark_fps).floor() as usize;
    let frames = (0..n)
        .map(|k| {
            let points = template
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut y = p[1];
                    if i == 31 || i == 37 {
                        y -= mouth;
                    }
                    if i < 10 {
                        y -= brows;
                    }
                    if matches!(i, 20 | 21 | 26 | 27) {
                        y -= brows / 3.0;
                    }
                    [
                        round_to(b.x + p[0] * b.w + normal(r), 2),
                        round_to(b.y + y * b.h + normal(r), 2),
                    ]
                })
                .collect();
            LandmarkFrame {
                t: round_to(k as f64 / cfg.landmark_fps, 4),
                points,
                face_box: b,
            }
        })
        .collect();
    FaceLandmarkTrack {
        trial_id: trial_id.into(),
        frames,
    }
}

/// Gray face crop with the landmarks drawn as light squares.
fn render_face(frame: &LandmarkFrame) -> RgbImage {
    let b = frame.face_box;
    let mut img = RgbImage::from_fn(EMBED_SIZE, EMBED_SIZE, |_, _| [96, 96, 96]);
    let m = 24.0;
    let s = EMBED_SIZE as f64 - 2.0 * m;
    for p in &frame.points {
        let cx = (m + (p[0] - b.x) / b.w * s).round() as i64;
        let cy = (m + (p[1] - b.y) / b.h * s).round() as i64;
        for y in cy - 2..=cy + 2 {
            for x in cx - 2..=cx + 2 {
                if (0..EMBED_SIZE as i64).contains(&x) && (0..EMBED_SIZE as i64).contains(&y) {
                    img.put(x as usize, y as usize, [230, 230, 230]);
                }
            }
        }
    }
    img
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes a synthetic dataset under `out_dir` and returns its manifest
/// (also saved as `manifest.json`).
pub fn synth_generate(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    mkdir(out_dir)?;
    let mods = cfg.modalities;
    let mut manifest = DatasetManifest {
        dataset_id: cfg.dataset_id.clone(),
        rating_scale: RatingScale { min: 1.0, max: 9.0 },
        sampling_rates: Default::default(),
        channels: Default::default(),
        scalp_layout_ref: None,
        eeg_raw: false,
        notes: format!("synthetic; seed {}", cfg.seed),
        subjects: Vec::new(),
        root: out_dir.to_path_buf(),
    };
    if mods.eeg {
        manifest.sampling_rates.insert(Modality::Eeg, cfg.eeg_fs);
        manifest.channels.insert(
            Modality::Eeg,
            cfg.montage.channels().iter().map(|s| s.to_string()).collect(),
        );
        manifest.scalp_layout_ref = Some(cfg.montage.layout_ref().into());
    }
    if let Some(m) = mods.cardiac {
        manifest.sampling_rates.insert(m, cfg.cardiac_fs);
        let names = if m == Modality::Ecg {
            vec!["ECG1".to_string(), "ECG2".to_string()]
        } else {
            vec!["PPG".to_string()]
        };
        manifest.channels.insert(m, names);
    }
    if mods.gsr {
        manifest.sampling_rates.insert(Modality::Gsr, cfg.gsr_fs);
        manifest.channels.insert(Modality::Gsr, vec!["GSR".into()]);
    }

    for s in 0..cfg.n_subjects {
        let subject_id = format!("s{:02}", s + 1);
        let mut sr = rng::stream(cfg.seed, "synth-subject", s as u64);
        let subj = Subject {
            gain: sr.gen_range(0.8..1.2),
            channel_gain: (0..cfg.montage.channels().len())
                .map(|_| sr.gen_range(0.8..1.2))
                .collect(),
            hr: sr.gen_range(62.0..78.0),
            face: FaceBox {
                x: round_to(60.0 + 4.0 * normal(&mut sr), 2),
                y: round_to(40.0 + 4.0 * normal(&mut sr), 2),
                w: round_to(200.0 * sr.gen_range(0.9..1.1), 2),
                h: round_to(240.0 * sr.gen_range(0.9..1.1), 2),
            },
        };
        let mut quadrants: Vec<usize> = (0..cfg.trials_per_subject).map(|k| k % 4).collect();
        quadrants.shuffle(&mut sr);
        let dir = out_dir.join(&subject_id);
        mkdir(&dir)?;
        let mut trials = Vec::new();
        for (k, &q) in quadrants.iter().enumerate() {
            let trial_id = format!("t{:02}", k + 1);
            let index = (s * cfg.trials_per_subject + k) as u64;
            let mut r = rng::stream(cfg.seed, "synth-trial", index);
            let mut miss = rng::stream(cfg.seed, "synth-missing", index);
            // Quadrant order HVHA, LVHA, LVLA, HVLA.
            let high = (q == 0 || q == 3, q <= 1);
            let rating = |h: bool, r: &mut ChaCha8Rng| {
                round_to(
                    if h {
                        r.gen_range(5.5..9.0)
                    } else {
                        r.gen_range(1.0..4.5)
                    },
                    2,
                )
            };
            let valence = rating(high.0, &mut r);
            let arousal = rating(high.1, &mut r);
            let liking = round_to((valence + normal(&mut r)).clamp(1.0, 9.0), 2);
            let mut entry = TrialEntry {
                trial_id: trial_id.clone(),
                labels: RawLabels {
                    valence,
                    arousal,
                    liking: Some(liking),
                },
                files: Default::default(),
                landmarks: None,
                face_frames: Vec::new(),
            };
            let mut keep = || miss.gen::<f64>() >= cfg.missing_rate;
            let rel = |suffix: &str| format!("{subject_id}/{trial_id}_{suffix}");

            // Streams per modality keep each one independent of which
            // others are enabled.
            if mods.eeg {
                let x = eeg_trial(cfg, &subj, high, &mut rng::stream(cfg.seed, "synth-eeg", index))?;
                if keep() {
                    let p = rel("eeg.csv");
                    write_signal_csv(&out_dir.join(&p), &x)?;
                    entry.files.insert(Modality::Eeg, p);
                }
            }
            if let Some(m) = mods.cardiac {
                let ecg = m == Modality::Ecg;
                let x = cardiac_trial(
                    cfg,
                    &subj,
                    high,
                    ecg,
                    &mut rng::stream(cfg.seed, "synth-cardiac", index),
                );
                if keep() {
                    let p = rel(if ecg { "ecg.csv" } else { "ppg.csv" });
                    write_signal_csv(&out_dir.join(&p), &x)?;
                    entry.files.insert(m, p);
                }
            }
            if mods.gsr {
                let x = gsr_trial(cfg, &subj, high, &mut rng::stream(cfg.seed, "synth-gsr", index));
                if keep() {
                    let p = rel("gsr.csv");
                    write_signal_csv(&out_dir.join(&p), &x)?;
                    entry.files.insert(Modality::Gsr, p);
                }
            }
            if mods.landmarks || mods.face_frames {
                let track = landmark_track(
                    cfg,
                    &trial_id,
                    &subj,
                    high,
                    &mut rng::stream(cfg.seed, "synth-face", index),
                );
                if mods.landmarks && keep() {
                    let p = rel("landmarks.csv");
                    write_landmark_csv(&out_dir.join(&p), &track)?;
                    entry.landmarks = Some(p);
                }
                if mods.face_frames && keep() {
                    let fdir = rel("face");
                    mkdir(&out_dir.join(&fdir))?;
                    let seconds = cfg.trial_length_s.floor() as usize;
                    for sec in 0..seconds {
                        let t = sec as f64 + 0.5;
                        let frame = track
                            .frames
                            .iter()
                            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
                            .expect("at least one frame");
                        let p = format!("{fdir}/{sec:03}.png");
                        render_face(frame).save_png(&out_dir.join(&p))?;
                        entry.face_frames.push(p);
                    }
                }
            }
            trials.push(entry);
        }
        manifest.subjects.push(SubjectEntry { subject_id, trials });
    }
    let path: PathBuf = out_dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_manifest_with_warnings;

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 2,
            trials_per_subject: 4,
            trial_length_s: 10.0,
            modalities: SynthModalities {
                face_frames: true,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn read_all(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn generates_loadable_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = synth_generate(&small(), dir.path()).unwrap();
        assert_eq!(m.n_trials(), 8);
        let (loaded, warnings) = load_manifest_with_warnings(&dir.path().join("manifest.json")).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(loaded.subjects, m.subjects);
        let t = loaded.trials().next().unwrap();
        let eeg = t.load(Modality::Eeg).unwrap().unwrap();
        assert_eq!((eeg.n_channels(), eeg.n_samples()), (32, 1280));
        assert_eq!(t.face_frame_paths().len(), 10);
        assert_eq!(t.load_landmarks().unwrap().unwrap().frames.len(), 50);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        synth_generate(&small(), a.path()).unwrap();
        synth_generate(&small(), b.path()).unwrap();
        let (fa, fb) = (read_all(a.path()), read_all(b.path()));
        assert!(fa.len() > 30);
        assert_eq!(fa, fb);
    }

    #[test]
    fn labels_balanced_and_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            modalities: SynthModalities {
                eeg: false,
                cardiac: None,
                gsr: false,
                landmarks: false,
                face_frames: false,
            },
            ..Default::default()
        };
        let m = synth_generate(&cfg, dir.path()).unwrap();
        assert_eq!(m.n_trials(), 200);
        for s in &m.subjects {
            let high = s.trials.iter().filter(|t| t.labels.valence > 5.0).count();
            assert_eq!(high, 10);
            assert!(s.trials.iter().all(|t| (t.labels.valence - 5.0).abs() >= 0.5));
        }
    }

    #[test]
    fn missing_rate_drops_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            missing_rate: 0.5,
            ..small()
        };
        let m = synth_generate(&cfg, dir.path()).unwrap();
        let present: usize = m.subjects.iter().flat_map(|s| &s.trials).map(|t| t.files.len()).sum();
        assert!(present < 24);
    }

    #[test]
    fn planted_alpha_raises_posterior_power() {
        let cfg = SynthConfig::default();
        let subj = Subject {
            gain: 1.0,
            channel_gain: vec![1.0; 32],
            hr: 70.0,
            face: FaceBox {
                x: 0.0,
                y: 0.0,
                w: 1.0,
                h: 1.0,
            },
        };
        let lo = eeg_trial(&cfg, &subj, (false, false), &mut rng::stream(1, "t", 0)).unwrap();
        let hi = eeg_trial(&cfg, &subj, (true, false), &mut rng::stream(1, "t", 0)).unwrap();
        let o1 = MONTAGE_32.iter().position(|c| *c == "O1").unwrap();
        let fp1 = MONTAGE_32.iter().position(|c| *c == "Fp1").unwrap();
        let band = crate::dsp::BandDefinition::new("alpha", 8.0, 13.0);
        let alpha = |x: &[f64]| crate::dsp::welch_band_power(x, 128.0, &band, 1.0, 0.5).unwrap();
        assert!(alpha(&hi[o1]) > 3.0 * alpha(&lo[o1]));
        assert_eq!(hi[fp1], lo[fp1]);
    }

    #[test]
    fn rejects_bad_config() {
        let dir = tempfile::tempdir().unwrap();
        for cfg in [
            SynthConfig {
                trial_length_s: 5.0,
                ..small()
            },
            SynthConfig {
                effects: default_effects(-1.0),
                ..small()
            },
        ] {
            assert!(matches!(
                synth_generate(&cfg, dir.path()),
                Err(Error::InvalidParameter(_))
            ));
        }
    }
}
