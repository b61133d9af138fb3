use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElmConfig {
    pub hidden: usize,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for ElmConfig {
    fn default() -> Self {
        ElmConfig {
            hidden: 500,
            ridge: 1e-3,
            seed: 0,
        }
    }
}

/// Single-hidden-layer extreme learning machine with sigmoid units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    /// `[hidden × inputs]`
    pub input_weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// `[hidden × classes]`
    pub output_weights: Vec<Vec<f64>>,
    pub n_classes: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl ElmModel {
    pub fn input_dim(&self) -> usize {
        self.input_weights.first().map_or(0, Vec::len)
    }

    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.input_weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| sigmoid(w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b))
            .collect()
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let h = self.hidden(x);
        let mut s = vec![0.0; self.n_classes];
        for (hi, row) in h.iter().zip(&self.output_weights) {
            for (sc, w) in s.iter_mut().zip(row) {
                *sc += hi * w;
            }
        }
        Ok(s)
    }

    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let s = self.scores(x)?;
        Ok((argmax(&s), s))
    }
}

/// Fits output weights by ridge least squares onto one-hot targets.
/// `n_classes` fixes the score width even if some class is absent.
pub fn elm_train(x: &[Vec<f64>], labels: &[usize], n_classes: usize, cfg: &ElmConfig) -> Result<ElmModel> {
    if x.len() != labels.len() || x.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} samples vs {} labels",
            x.len(),
            labels.len()
        )));
    }
    if cfg.hidden == 0 || !(cfg.ridge >= 0.0) {
        return Err(Error::InvalidParameter("hidden must be >= 1 and ridge >= 0".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {l} >= class count {n_classes}")));
    }
    let mut present = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::InvalidParameter("training data has fewer than 2 classes".into()));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter("ragged training matrix".into()));
    }

    // one stream per input column, so appending or dropping trailing
    // features leaves the other weights untouched
    let mut input_weights = vec![vec![0.0; d]; cfg.hidden];
    for j in 0..d {
        let mut r = rng::stream(cfg.seed, "elm-w", j as u64);
        for w in input_weights.iter_mut() {
            w[j] = r.gen_range(-1.0..=1.0);
        }
    }
    let mut r = rng::stream(cfg.seed, "elm-b", 0);
    let biases: Vec<f64> = (0..cfg.hidden).map(|_| r.gen_range(-1.0..=1.0)).collect();
    let mut model = ElmModel {
        input_weights,
        biases,
        output_weights: Vec::new(),
        n_classes,
    };

    let n = x.len();
    let h = cfg.hidden;
    let mut a = DMatrix::<f64>::zeros(n, h);
    for (i, row) in x.iter().enumerate() {
        for (j, v) in model.hidden(row).into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    let t = DMatrix::from_fn(n, n_classes, |i, c| if labels[i] == c { 1.0 } else { 0.0 });
    let mut gram = a.transpose() * &a;
    for j in 0..h {
        gram[(j, j)] += cfg.ridge;
    }
    let rhs = a.transpose() * &t;
    let beta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Numerical(format!("ELM output solve failed: {e}")))?,
    };
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite ELM output weights".into()));
    }
    model.output_weights = (0..h).map(|j| (0..n_classes).map(|c| beta[(j, c)]).collect()).collect();
    Ok(model)
}
