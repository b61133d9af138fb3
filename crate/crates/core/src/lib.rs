//! Feature extraction and affect classification for multi-modal
//! bio-sensing data (EEG, ECG/PPG, GSR, frontal-face landmarks and crops).
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: manifests, recordings, label binarization, CSV formats
//! - [`dsp`]: smoothing, band-pass, Welch/STFT, peaks, difference moments
//! - [`eeg`], [`cardiac`], [`gsr`], [`face`]: per-modality feature families
//! - [`image`] and [`embedding`]: rasters, colour maps and embedding providers
//! - [`learn`]: PCA, rescaling, ELM, LSTM, metrics
//! - [`harness`]: fusion, evaluation protocols, synthetic datasets

// `!(x > 0.0)` style checks are used on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cardiac;
pub mod data;
pub mod dsp;
pub mod eeg;
pub mod embedding;
pub mod error;
pub mod face;
pub mod gsr;
pub mod harness;
pub mod image;
pub mod layout;
pub mod learn;
pub mod rng;

pub use error::{Error, Result};
