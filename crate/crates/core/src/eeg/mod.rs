//! EEG feature families: band power, pairwise conditional entropy and
//! scalp-topography images.

pub mod entropy;
pub mod psd;
pub mod topo;

pub use deep::{eeg_deep_features, eeg_topo_embedding, per_second_eeg_images, topo_from_powers, trial_topo_image};
pub use entropy::{
    conditional_entropy, mutual_information, pairwise_entropy_features, EntropyDirection, MutualInfoEstimatorConfig,
};
pub use psd::{band_powers, band_psd_features, preprocess_eeg, PsdConfig};
pub use topo::{compose_rgb_topo, render_topo_band, CloughTocher, TopoImage, TOPO_GRID};

mod deep;
