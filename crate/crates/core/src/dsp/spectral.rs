use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl BandDefinition {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        BandDefinition {
            name: name.into(),
            low,
            high,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.low > 0.0 && self.low < self.high) {
            return Err(Error::InvalidParameter(format!(
                "band {} [{}, {}] must satisfy 0 < low < high",
                self.name, self.low, self.high
            )));
        }
        Ok(())
    }

    /// Half-open membership test `[low, high)`, so adjacent bands partition
    /// frequency bins without double counting.
    pub fn contains(&self, f: f64) -> bool {
        f >= self.low && f < self.high
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

struct Framer {
    win: usize,
    hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Framer {
    fn new(fs: f64, win_s: f64, hop_s: f64, n: usize) -> Result<Self> {
        if !(win_s * fs >= 4.0) {
            return Err(Error::InvalidParameter(format!(
                "window of {win_s} s at {fs} Hz is shorter than 4 samples"
            )));
        }
        if !(hop_s > 0.0 && hop_s <= win_s) {
            return Err(Error::InvalidParameter(format!("hop {hop_s} s must be in (0, window]")));
        }
        let win = (win_s * fs).round() as usize;
        let hop = ((hop_s * fs).round() as usize).max(1);
        if n < win {
            return Err(Error::TooShort { needed: win, got: n });
        }
        Ok(Framer {
            win,
            hop,
            window: hann(win),
            fft: FftPlanner::new().plan_fft_forward(win),
        })
    }

    fn n_frames(&self, n: usize) -> usize {
        (n - self.win) / self.hop + 1
    }

    /// Squared magnitudes of the one-sided spectrum of a mean-removed,
    /// Hann-windowed frame.
    fn frame_power(&self, frame: &[f64], buf: &mut Vec<Complex<f64>>) -> Vec<f64> {
        let mean = frame.iter().sum::<f64>() / frame.len() as f64;
        buf.clear();
        buf.extend(
            frame
                .iter()
                .zip(&self.window)
                .map(|(&x, &w)| Complex::new((x - mean) * w, 0.0)),
        );
        self.fft.process(buf);
        buf[..self.win / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Frame-averaged one-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    /// Power per Hz.
    pub density: Vec<f64>,
    pub df: f64,
}

impl Psd {
    /// Integrated power over `[band.low, band.high)`.
    pub fn band_power(&self, band: &BandDefinition) -> f64 {
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| band.contains(**f))
            .map(|(_, p)| p * self.df)
            .sum()
    }
}

/// Welch estimate: mean-removed Hann frames of `win_s` every `hop_s`,
/// periodograms averaged over frames.
pub fn welch_psd(signal: &[f64], fs: f64, win_s: f64, hop_s: f64) -> Result<Psd> {
    let framer = Framer::new(fs, win_s, hop_s, signal.len())?;
    let win = framer.win;
    let frames = framer.n_frames(signal.len());
    let scale = 1.0 / (fs * framer.window.iter().map(|w| w * w).sum::<f64>());
    let nbins = win / 2 + 1;
    let mut acc = vec![0.0; nbins];
    let mut buf = Vec::with_capacity(win);
    for k in 0..frames {
        let start = k * framer.hop;
        let p = framer.frame_power(&signal[start..start + win], &mut buf);
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let density = acc
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let one_sided = if i == 0 || (win % 2 == 0 && i == win / 2) {
                1.0
            } else {
                2.0
            };
            one_sided * v * scale / frames as f64
        })
        .collect();
    let df = fs / win as f64;
    Ok(Psd {
        freqs: (0..nbins).map(|i| i as f64 * df).collect(),
        density,
        df,
    })
}

/// Mean over frames of the periodogram power integrated over `band`.
pub fn welch_band_power(signal: &[f64], fs: f64, band: &BandDefinition, win_s: f64, hop_s: f64) -> Result<f64> {
    band.check()?;
    Ok(welch_psd(signal, fs, win_s, hop_s)?.band_power(band))
}

/// Power spectrogram `[freq bin × frame]`, bins above `fmax` dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramMatrix {
    pub values: Vec<Vec<f64>>,
    pub freq_axis: Vec<f64>,
    pub time_axis: Vec<f64>,
    pub fs: f64,
}

impl SpectrogramMatrix {
    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    pub fn n_frames(&self) -> usize {
        self.time_axis.len()
    }
}

pub fn stft_spectrogram(signal: &[f64], fs: f64, fmax: f64, win_s: f64, hop_s: f64) -> Result<SpectrogramMatrix> {
    if !(fmax > 0.0 && fmax < fs / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "fmax {fmax} Hz must be in (0, fs/2 = {})",
            fs / 2.0
        )));
    }
    let framer = Framer::new(fs, win_s, hop_s, signal.len())?;
    let win = framer.win;
    let frames = framer.n_frames(signal.len());
    let df = fs / win as f64;
    let nbins = ((fmax / df).floor() as usize + 1).min(win / 2 + 1);
    let mut values = vec![Vec::with_capacity(frames); nbins];
    let mut buf = Vec::with_capacity(win);
    let mut time_axis = Vec::with_capacity(frames);
    for k in 0..frames {
        let start = k * framer.hop;
        let p = framer.frame_power(&signal[start..start + win], &mut buf);
        for (row, v) in values.iter_mut().zip(p) {
            row.push(v);
        }
        time_axis.push((start as f64 + win as f64 / 2.0) / fs);
    }
    Ok(SpectrogramMatrix {
        values,
        freq_axis: (0..nbins).map(|i| i as f64 * df).collect(),
        time_axis,
        fs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(n²) DFT of a windowed, mean-removed frame, one-sided power.
    fn dft_power(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        let w = hann(n);
        let mean = frame.iter().sum::<f64>() / n as f64;
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, (&x, &wt)) in frame.iter().zip(&w).enumerate() {
                    let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += (x - mean) * wt * ang.cos();
                    im += (x - mean) * wt * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn sine(f: f64, amp: f64, fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs) as usize)
            .map(|i| amp * (2.0 * PI * f * i as f64 / fs).sin())
            .collect()
    }

    fn bands() -> [BandDefinition; 3] {
        crate::dsp::eeg_bands()
    }

    #[test]
    fn matches_direct_dft() {
        let fs = 128.0;
        let x: Vec<f64> = (0..512).map(|i| ((i * 7919) % 97) as f64 / 97.0).collect();
        let psd = welch_psd(&x, fs, 1.0, 0.5).unwrap();
        let win = 128;
        let scale = 1.0 / (fs * hann(win).iter().map(|w| w * w).sum::<f64>());
        let frames = (512 - win) / 64 + 1;
        let mut acc = vec![0.0; win / 2 + 1];
        for k in 0..frames {
            for (a, p) in acc.iter_mut().zip(dft_power(&x[k * 64..k * 64 + win])) {
                *a += p;
            }
        }
        for (i, (&got, &raw)) in psd.density.iter().zip(&acc).enumerate() {
            let factor = if i == 0 || i == win / 2 { 1.0 } else { 2.0 };
            let want = factor * raw * scale / frames as f64;
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-12), "bin {i}");
        }
    }

    #[test]
    fn alpha_sine_concentrates_in_alpha() {
        let x = sine(10.0, 1.0, 128.0, 60.0);
        let [theta, alpha, beta] = bands();
        let total = BandDefinition::new("total", 4.0, 30.0);
        let a = welch_band_power(&x, 128.0, &alpha, 1.0, 0.5).unwrap();
        let t = welch_band_power(&x, 128.0, &total, 1.0, 0.5).unwrap();
        assert!(a / t >= 0.99, "{}", a / t);
        let th = welch_band_power(&x, 128.0, &theta, 1.0, 0.5).unwrap();
        let be = welch_band_power(&x, 128.0, &beta, 1.0, 0.5).unwrap();
        assert!(a > 50.0 * th.max(be));
        // Parseval: a unit sine carries 0.5 of power
        assert!((t - 0.5).abs() < 0.01, "{t}");
    }

    #[test]
    fn theta_and_beta_match_for_equal_sines() {
        let x: Vec<f64> = sine(5.0, 1.0, 128.0, 60.0)
            .iter()
            .zip(sine(20.0, 1.0, 128.0, 60.0))
            .map(|(a, b)| a + b)
            .collect();
        let [theta, _, beta] = bands();
        let t = welch_band_power(&x, 128.0, &theta, 1.0, 0.5).unwrap();
        let b = welch_band_power(&x, 128.0, &beta, 1.0, 0.5).unwrap();
        assert!((t - b).abs() / t.max(b) < 0.02);
    }

    #[test]
    fn zero_signal_and_short_signal() {
        let [_, alpha, _] = bands();
        assert_eq!(welch_band_power(&[0.0; 256], 128.0, &alpha, 1.0, 0.5).unwrap(), 0.0);
        assert!(matches!(
            welch_band_power(&[0.0; 100], 128.0, &alpha, 1.0, 0.5),
            Err(Error::TooShort { .. })
        ));
        assert!(welch_band_power(&[0.0; 256], 128.0, &alpha, 1.0, 2.0).is_err());
        assert!(welch_band_power(&[0.0; 256], 2.0, &alpha, 1.0, 0.5).is_err());
    }

    #[test]
    fn band_power_scales_quadratically_and_partitions() {
        let x: Vec<f64> = (0..128 * 20)
            .map(|i| {
                let t = i as f64 / 128.0;
                (2.0 * PI * 6.3 * t).sin() + 0.5 * (2.0 * PI * 11.7 * t).cos() + ((i * 31) % 17) as f64 / 17.0
            })
            .collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let total = BandDefinition::new("total", 4.0, 30.0);
        let p1 = welch_psd(&x, 128.0, 1.0, 0.5).unwrap();
        let p2 = welch_psd(&x2, 128.0, 1.0, 0.5).unwrap();
        for b in bands() {
            let (a, c) = (p1.band_power(&b), p2.band_power(&b));
            assert!((c - 4.0 * a).abs() <= 1e-6 * 4.0 * a);
        }
        let sum: f64 = bands().iter().map(|b| p1.band_power(b)).sum();
        let whole = p1.band_power(&total);
        assert!((sum - whole).abs() <= 0.01 * whole);
    }

    #[test]
    fn spectrogram_tracks_sine() {
        let fs = 32.0;
        let x = sine(1.0, 1.0, fs, 30.0);
        let s = stft_spectrogram(&x, fs, 5.0, 4.0, 1.0).unwrap();
        assert_eq!(s.n_frames(), (x.len() - 128) / 32 + 1);
        assert!(*s.freq_axis.last().unwrap() <= 5.0);
        assert!(s.freq_axis.windows(2).all(|w| w[0] < w[1]));
        let bin_1hz = s.freq_axis.iter().position(|&f| (f - 1.0).abs() < 1e-9).unwrap();
        for t in 0..s.n_frames() {
            let arg = (0..s.n_bins())
                .max_by(|&a, &b| s.values[a][t].total_cmp(&s.values[b][t]))
                .unwrap();
            assert!(arg.abs_diff(bin_1hz) <= 1);
        }
        assert!(s.values.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn spectrogram_zero_and_errors() {
        let s = stft_spectrogram(&[0.0; 400], 32.0, 5.0, 4.0, 1.0).unwrap();
        assert!(s.values.iter().flatten().all(|&v| v == 0.0));
        assert!(stft_spectrogram(&[0.0; 400], 32.0, 16.0, 4.0, 1.0).is_err());
        assert!(matches!(
            stft_spectrogram(&[0.0; 100], 32.0, 5.0, 4.0, 1.0),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn spectrogram_is_deterministic() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..1024).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = stft_spectrogram(&x, 64.0, 5.0, 2.0, 0.5).unwrap();
        let b = stft_spectrogram(&x, 64.0, 5.0, 2.0, 0.5).unwrap();
        let bits = |s: &SpectrogramMatrix| -> Vec<u64> { s.values.iter().flatten().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&a), bits(&b));
    }
}
