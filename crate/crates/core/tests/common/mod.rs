#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use affectlab::data::{Modality, TrialRecording};

pub fn rec(modality: Modality, channels: Vec<String>, samples: Vec<Vec<f64>>, fs: f64) -> TrialRecording {
    TrialRecording::new("t01", "s01", modality, channels, samples, fs).unwrap()
}

/// Gaussian beats (sigma 40 ms) at exactly `bpm`, first beat half a period
/// in, over a slow 0.2 Hz baseline wander.
pub fn pulse_train(bpm: f64, seconds: f64, fs: f64) -> (Vec<f64>, usize) {
    let period = 60.0 / bpm;
    let mut beats = Vec::new();
    let mut t = period / 2.0;
    while t < seconds {
        beats.push(t);
        t += period;
    }
    let n = (seconds * fs) as usize;
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            beats
                .iter()
                .map(|b| (-(t - b).powi(2) / (2.0 * 0.04f64.powi(2))).exp())
                .sum::<f64>()
                + 0.05 * (2.0 * PI * 0.2 * t).sin()
        })
        .collect();
    (x, beats.len())
}

pub fn sine(freq: f64, amp: f64, seconds: f64, fs: f64) -> Vec<f64> {
    (0..(seconds * fs) as usize)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
        .collect()
}

/// Two skin-conductance bumps on a slow ramp, sampled at 32 Hz for 30 s.
pub fn fixture_gsr() -> TrialRecording {
    let fs = 32.0;
    let x = (0..(30.0 * fs) as usize)
        .map(|i| {
            let t = i as f64 / fs;
            let bump = |t0: f64, a: f64| {
                if t >= t0 {
                    a * (1.0 - (-(t - t0) / 0.75).exp()) * (-(t - t0) / 4.0).exp()
                } else {
                    0.0
                }
            };
            2.0 + 0.01 * t + bump(6.0, 0.5) + bump(18.0, 0.3) + 0.02 * (2.0 * PI * 0.5 * t).sin()
        })
        .collect();
    rec(Modality::Gsr, vec!["GSR".into()], vec![x], fs)
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}
