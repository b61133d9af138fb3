//! Shared signal kernels. Everything here is a pure function of its inputs.

mod filter;
mod peaks;
mod spectral;
mod stats;

pub use filter::{bandpass, moving_average, Biquad};
pub use peaks::detect_peaks;
pub use spectral::{hann, stft_spectrogram, welch_band_power, welch_psd, BandDefinition, Psd, SpectrogramMatrix};
pub use stats::{diff_moments, mean, min_max_scale, percentile, population_std, DiffMoments};

/// Theta, alpha and beta bands, in feature order.
pub fn eeg_bands() -> [BandDefinition; 3] {
    [
        BandDefinition::new("theta", 4.0, 7.0),
        BandDefinition::new("alpha", 7.0, 13.0),
        BandDefinition::new("beta", 13.0, 30.0),
    ]
}
