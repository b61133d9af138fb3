//! Image embedding providers.
//!
//! A provider maps a 224×224 RGB image to a fixed-length real vector. The
//! [`StubProvider`] is a deterministic offline stand-in; [`SidecarProvider`]
//! hands batches to an external process through a shared directory.

mod exchange;
mod stub;

pub use exchange::{
    encode_response, parse_job, parse_response, serve_exchange, serve_pending, ExchangeJob, ServeMode, SidecarProvider,
    DEFAULT_TIMEOUT,
};
pub use stub::StubProvider;

use crate::error::Result;
use crate::image::RgbImage;

/// Embedding width of the stub and of the reference networks.
pub const DEFAULT_DIM: usize = 4096;

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Short identifier used in cache keys and provenance records.
    fn id(&self) -> String;

    /// One vector per image, in order.
    fn embed_batch(&self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>>;

    fn embed(&self, image: &RgbImage) -> Result<Vec<f64>> {
        let mut v = self.embed_batch(std::slice::from_ref(image))?;
        Ok(v.pop().expect("one row per image"))
    }
}
