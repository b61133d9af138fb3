//! Parzen-window mutual information and conditional entropy between
//! channel pairs.
//!
//! Both series are z-scored and evaluated on one shared grid spanning
//! ±`extent` standard deviations. In those coordinates the covariance of
//! the bivariate Gaussian window is the correlation matrix `R`, so the joint
//! density uses `exp(-zᵀR⁻¹z / 2h²)` and the marginals use the 1-D window
//! with the same `h`. Densities are renormalised to sum to one on the grid
//! and the mutual information is the discrete sum
//! `Σ p(x,y) ln(p(x,y) / (p(x) p(y)))`, clamped at zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureBlock, Modality, TrialRecording};
use crate::error::{Error, Result};

/// Minimum series length for the estimator.
pub const MIN_SAMPLES: usize = 64;

// Kernel contributions beyond this many bandwidths are dropped (< e^-18).
const TRUNCATE_H: f64 = 6.0;
// Keeps R invertible for perfectly correlated inputs.
const MAX_ABS_CORR: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutualInfoEstimatorConfig {
    /// Window width in standard-deviation units; `None` uses Silverman's
    /// rule `1.06 · N^(-1/5)`.
    pub bandwidth: Option<f64>,
    /// Evaluation points per axis.
    pub eval_grid: usize,
    /// Grid half-width in standard deviations.
    pub extent: f64,
}

impl Default for MutualInfoEstimatorConfig {
    fn default() -> Self {
        MutualInfoEstimatorConfig {
            bandwidth: None,
            eval_grid: 64,
            extent: 3.0,
        }
    }
}

impl MutualInfoEstimatorConfig {
    fn validate(&self) -> Result<()> {
        if self.eval_grid < 32 {
            return Err(Error::InvalidParameter(format!(
                "eval_grid {} must be >= 32",
                self.eval_grid
            )));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("bandwidth {h} must be > 0")));
            }
        }
        if !(self.extent > 0.0) {
            return Err(Error::InvalidParameter("grid extent must be > 0".into()));
        }
        Ok(())
    }

    fn bandwidth_for(&self, n: usize) -> f64 {
        self.bandwidth.unwrap_or_else(|| 1.06 * (n as f64).powf(-0.2))
    }

    fn grid(&self) -> Vec<f64> {
        let g = self.eval_grid;
        (0..g)
            .map(|i| -self.extent + 2.0 * self.extent * i as f64 / (g - 1) as f64)
            .collect()
    }
}

/// A z-scored series with its gridded marginal density and entropy.
struct Marginal {
    z: Vec<f64>,
    density: Vec<f64>,
    entropy: f64,
}

/// Grid index range `[lo, hi)` within `TRUNCATE_H · h` of `z`.
fn window(z: f64, h: f64, cfg: &MutualInfoEstimatorConfig) -> (usize, usize) {
    let g = cfg.eval_grid;
    let step = 2.0 * cfg.extent / (g - 1) as f64;
    let lo = ((z - TRUNCATE_H * h + cfg.extent) / step).ceil();
    let hi = ((z + TRUNCATE_H * h + cfg.extent) / step).floor() + 1.0;
    let lo = lo.clamp(0.0, g as f64) as usize;
    let hi = hi.clamp(0.0, g as f64) as usize;
    (lo, hi.max(lo))
}

fn normalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v /= s);
    }
}

fn marginal(x: &[f64], cfg: &MutualInfoEstimatorConfig, grid: &[f64]) -> Result<Marginal> {
    let n = x.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooShort {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) || !(sd > 1e-12 * mean.abs()) {
        return Err(Error::ConstantSignal);
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let h = cfg.bandwidth_for(n);
    let inv = 1.0 / (2.0 * h * h);
    let mut density = vec![0.0; grid.len()];
    for &zi in &z {
        let (lo, hi) = window(zi, h, cfg);
        for (k, d) in density[lo..hi].iter_mut().enumerate() {
            let dz = grid[lo + k] - zi;
            *d += (-dz * dz * inv).exp();
        }
    }
    normalize(&mut density);
    let entropy = -density.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    Ok(Marginal { z, density, entropy })
}

/// Unnormalized gridded joint density of two z-scored series.
fn joint_density(
    x: &Marginal,
    y: &Marginal,
    cfg: &MutualInfoEstimatorConfig,
    grid: &[f64],
    allow_recurrence: bool,
) -> Vec<f64> {
    let n = x.z.len();
    let g = grid.len();
    let h = cfg.bandwidth_for(n);
    let r = (x.z.iter().zip(&y.z).map(|(a, b)| a * b).sum::<f64>() / n as f64).clamp(-MAX_ABS_CORR, MAX_ABS_CORR);
    let scale = 1.0 / (2.0 * h * h * (1.0 - r * r));
    let step = 2.0 * cfg.extent / (g - 1) as f64;
    // Along a row the exponent is quadratic in the column, so successive
    // kernel values follow a two-multiply recurrence. Only safe while the
    // exponents inside a window stay far from under/overflow.
    let reach = 2.0 * TRUNCATE_H * h + 2.0 * step;
    let recurrence = allow_recurrence && scale * reach * reach < 600.0;
    let kappa = (-2.0 * scale * step * step).exp();
    let mut joint = vec![0.0; g * g];
    let mut du = Vec::with_capacity(g);
    for (&zx, &zy) in x.z.iter().zip(&y.z) {
        let (xl, xh) = window(zx, h, cfg);
        let (yl, yh) = window(zy, h, cfg);
        if yl == yh {
            continue;
        }
        du.clear();
        du.extend(grid[xl..xh].iter().map(|gx| gx - zx));
        let dy0 = grid[yl] - zy;
        for (a, &dx) in du.iter().enumerate() {
            let row = &mut joint[(xl + a) * g + yl..(xl + a) * g + yh];
            if recurrence {
                let q0 = dx * dx - 2.0 * r * dx * dy0 + dy0 * dy0;
                let mut e = (-q0 * scale).exp();
                let mut ratio = (-scale * step * (2.0 * dy0 - 2.0 * r * dx + step)).exp();
                for cell in row.iter_mut() {
                    *cell += e;
                    e *= ratio;
                    ratio *= kappa;
                }
            } else {
                for (b, cell) in row.iter_mut().enumerate() {
                    let dy = grid[yl + b] - zy;
                    let q = dx * dx - 2.0 * r * dx * dy + dy * dy;
                    *cell += (-q * scale).exp();
                }
            }
        }
    }
    joint
}

fn joint_mi(x: &Marginal, y: &Marginal, cfg: &MutualInfoEstimatorConfig, grid: &[f64]) -> f64 {
    let g = grid.len();
    let mut joint = joint_density(x, y, cfg, grid, true);
    normalize(&mut joint);
    let mut mi = 0.0;
    for a in 0..g {
        for b in 0..g {
            let p = joint[a * g + b];
            let q = x.density[a] * y.density[b];
            if p > 0.0 && q > 0.0 {
                mi += p * (p / q).ln();
            }
        }
    }
    mi.max(0.0)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// I(X;Y) in nats.
pub fn mutual_information(x: &[f64], y: &[f64], cfg: &MutualInfoEstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    check_pair(x, y)?;
    let grid = cfg.grid();
    let mx = marginal(x, cfg, &grid)?;
    let my = marginal(y, cfg, &grid)?;
    Ok(joint_mi(&mx, &my, cfg, &grid))
}

/// H(Y|X) = H(Y) − I(X;Y), with H(Y) from the same gridded marginal.
pub fn conditional_entropy(x: &[f64], y: &[f64], cfg: &MutualInfoEstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    check_pair(x, y)?;
    let grid = cfg.grid();
    let mx = marginal(x, cfg, &grid)?;
    let my = marginal(y, cfg, &grid)?;
    Ok(my.entropy - joint_mi(&mx, &my, cfg, &grid))
}

/// Which member of the pair `(i, j)`, `i < j`, is conditioned on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyDirection {
    /// H(ch_j | ch_i)
    #[default]
    LaterGivenEarlier,
    /// H(ch_i | ch_j)
    EarlierGivenLater,
}

/// One conditional entropy per unordered channel pair, ordered
/// lexicographically by `(i, j)`.
pub fn pairwise_entropy_features(
    trial: &TrialRecording,
    cfg: &MutualInfoEstimatorConfig,
    direction: EntropyDirection,
) -> Result<FeatureBlock> {
    if trial.modality != Modality::Eeg {
        return Err(Error::InvalidSignal(format!("expected EEG, got {}", trial.modality)));
    }
    let c = trial.n_channels();
    if c < 2 {
        return Err(Error::InvalidSignal("need at least 2 channels".into()));
    }
    cfg.validate()?;
    let grid = cfg.grid();
    let marginals = trial
        .samples
        .iter()
        .zip(&trial.channels)
        .map(|(ch, name)| marginal(ch, cfg, &grid).map_err(|e| e.context(format!("channel {name}"))))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..c).flat_map(|i| (i + 1..c).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (given, target) = match direction {
                EntropyDirection::LaterGivenEarlier => (i, j),
                EntropyDirection::EarlierGivenLater => (j, i),
            };
            marginals[target].entropy - joint_mi(&marginals[given], &marginals[target], cfg, &grid)
        })
        .collect();
    let names = pairs
        .iter()
        .map(|&(i, j)| format!("ce_{}_{}", trial.channels[i], trial.channels[j]))
        .collect();
    Ok(FeatureBlock::new(
        trial.trial_id.clone(),
        "EEG",
        "eeg_entropy",
        names,
        values,
    ))
}
