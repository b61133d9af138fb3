use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Centered moving average. Edge samples average over the part of the
/// window that overlaps the signal.
pub fn moving_average(signal: &[f64], fs: f64, window_s: f64) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let w = window_s * fs;
    if !(w >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "moving-average window of {window_s} s at {fs} Hz is shorter than one sample"
        )));
    }
    let w = (w.round() as usize).max(1);
    let left = (w - 1) / 2;
    let right = w / 2;
    let n = signal.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in signal {
        acc += v;
        prefix.push(acc);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect())
}

/// Second-order section, transposed direct form II.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn from_raw(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Biquad {
            b: [b0 / a0, b1 / a0, b2 / a0],
            a: [a1 / a0, a2 / a0],
        }
    }

    /// Bilinear-transformed low-pass section with quality factor `q`.
    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            (1.0 - c) / 2.0,
            1.0 - c,
            (1.0 - c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    pub fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            (1.0 + c) / 2.0,
            -(1.0 + c),
            (1.0 + c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

// Q factors of the two conjugate pole pairs of a 4th-order Butterworth.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_5];

/// Zero-phase band-pass: 4th-order Butterworth high-pass and low-pass
/// sections run forward then backward over an odd-extended copy of the
/// signal.
pub fn bandpass(signal: &[f64], fs: f64, low: f64, high: f64) -> Result<Vec<f64>> {
    if !(low > 0.0 && low < high && high < fs / 2.0) {
        return Err(Error::InvalidBand { low, high, fs });
    }
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let sections: Vec<Biquad> = BUTTER4_Q
        .iter()
        .map(|&q| Biquad::highpass(low, fs, q))
        .chain(BUTTER4_Q.iter().map(|&q| Biquad::lowpass(high, fs, q)))
        .collect();

    let n = signal.len();
    let pad = if n < 2 {
        0
    } else {
        ((3.0 * fs / low).ceil() as usize).max(27).min(n - 1)
    };
    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    for s in &sections {
        s.run(&mut ext);
    }
    ext.reverse();
    for s in &sections {
        s.run(&mut ext);
    }
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}
