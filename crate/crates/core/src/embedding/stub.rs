use rand::Rng;
use rayon::prelude::*;

use super::{EmbeddingProvider, DEFAULT_DIM};
use crate::error::Result;
use crate::image::{RgbImage, EMBED_SIZE};
use crate::rng;

const PATCH: usize = 16;
const INPUTS: usize = PATCH * PATCH * 4;

/// Seeded random projection of a 16×16 colour-plus-gray thumbnail,
/// squashed by tanh.
pub struct StubProvider {
    seed: u64,
    dim: usize,
    // row-major [dim × INPUTS]
    projection: Vec<f64>,
}

impl StubProvider {
    pub fn new(seed: u64) -> Self {
        Self::with_dim(seed, DEFAULT_DIM)
    }

    pub fn with_dim(seed: u64, dim: usize) -> Self {
        let mut r = rng::stream(seed, "stub-embed", 0);
        // unit variance pre-activations for inputs spread over [-0.5, 0.5]
        let a = 2.0 * 3f64.sqrt() / (INPUTS as f64).sqrt();
        let projection = (0..dim * INPUTS).map(|_| r.gen_range(-a..a)).collect();
        StubProvider { seed, dim, projection }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Centred thumbnail features fed to the projection.
    pub fn thumbnail(image: &RgbImage) -> Result<Vec<f64>> {
        image.expect_shape(EMBED_SIZE, EMBED_SIZE)?;
        let block = EMBED_SIZE / PATCH;
        let norm = 1.0 / (255.0 * (block * block) as f64);
        let mut rgb = vec![0.0; PATCH * PATCH * 3];
        for y in 0..EMBED_SIZE {
            for x in 0..EMBED_SIZE {
                let cell = (y / block) * PATCH + x / block;
                let px = image.get(x, y);
                for k in 0..3 {
                    rgb[cell * 3 + k] += px[k] as f64 * norm;
                }
            }
        }
        let gray: Vec<f64> = rgb.chunks(3).map(|c| (c[0] + c[1] + c[2]) / 3.0).collect();
        Ok(rgb.into_iter().chain(gray).map(|v| v - 0.5).collect())
    }

    /// Euclidean norm of each projection row; bounds the output change
    /// per unit change of the thumbnail.
    pub fn row_norms(&self) -> Vec<f64> {
        self.projection
            .chunks(INPUTS)
            .map(|r| r.iter().map(|w| w * w).sum::<f64>().sqrt())
            .collect()
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        self.projection
            .chunks(INPUTS)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>().tanh())
            .collect()
    }
}

impl EmbeddingProvider for StubProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("stub:{}:{}", self.seed, self.dim)
    }

    fn embed_batch(&self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>> {
        images
            .par_iter()
            .map(|img| Ok(self.project(&Self::thumbnail(img)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn pattern(shift: u8) -> RgbImage {
        RgbImage::from_fn(EMBED_SIZE, EMBED_SIZE, |x, y| {
            [(x as u8).wrapping_add(shift), y as u8, ((x * y) % 251) as u8]
        })
    }

    #[test]
    fn deterministic_and_sized() {
        let p = StubProvider::new(7);
        let a = p.embed(&pattern(0)).unwrap();
        assert_eq!(a.len(), 4096);
        assert_eq!(a, StubProvider::new(7).embed(&pattern(0)).unwrap());
        assert_ne!(a, StubProvider::new(8).embed(&pattern(0)).unwrap());
        assert!(a.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn one_level_change_is_small() {
        let p = StubProvider::new(3);
        let img = pattern(9);
        let mut other = img.clone();
        let px = other.get(100, 50);
        other.put(100, 50, [px[0] + 1, px[1], px[2]]);
        let (a, b) = (p.embed(&img).unwrap(), p.embed(&other).unwrap());
        let dx: f64 = StubProvider::thumbnail(&img)
            .unwrap()
            .iter()
            .zip(StubProvider::thumbnail(&other).unwrap())
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        // tanh is 1-Lipschitz, so each output moves at most |row|·|dx|
        let bound = p.row_norms().iter().cloned().fold(0.0, f64::max) * dx;
        let diff = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(diff <= bound + 1e-15);
        assert!(bound < 1e-2);
    }

    #[test]
    fn wrong_shape_rejected() {
        let p = StubProvider::with_dim(1, 8);
        let err = p.embed(&RgbImage::new(10, 10)).unwrap_err();
        assert!(matches!(err, Error::ImageShape { .. }));
    }
}
