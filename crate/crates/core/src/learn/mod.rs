//! Dimensionality reduction, rescaling, classifiers and metrics.

pub mod elm;
pub mod lstm;
pub mod metrics;
pub mod pca;
pub mod scale;
pub mod serial;

pub use elm::{argmax, elm_train, ElmConfig, ElmModel};
pub use lstm::{loss_curve_csv, lstm_train, EpochLoss, LstmConfig, LstmModel};
pub use metrics::{metrics, EvalReport, FoldResult};
pub use pca::{pca_fit, PcaModel};
pub use scale::MinMaxScaler;
pub use serial::{decode_blocks, encode_blocks, Model, FORMAT_VERSION};
