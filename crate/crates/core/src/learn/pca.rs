use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted principal-component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((w, v), m)| w * (v - m)).sum())
            .collect())
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (c, s) in self.components.iter().zip(z) {
            for (xi, w) in x.iter_mut().zip(c) {
                *xi += s * w;
            }
        }
        x
    }

    /// Fraction of total variance captured by each component.
    pub fn explained_ratio(&self, total_variance: f64) -> Vec<f64> {
        self.explained_variance.iter().map(|v| v / total_variance).collect()
    }
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Modified Gram–Schmidt; appends unit vectors to fill rank-deficient
/// directions so every returned row is unit length.
fn orthonormalize(rows: &mut Vec<Vec<f64>>, d: usize) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut next_unit = 0;
    for r in rows.iter() {
        let mut v = r.clone();
        loop {
            for q in &out {
                let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-8 {
                v.iter_mut().for_each(|a| *a /= n);
                break;
            }
            v = vec![0.0; d];
            v[next_unit] = 1.0;
            next_unit += 1;
        }
        out.push(v);
    }
    *rows = out;
}

/// Top-`k` principal components of the rows of `x`.
pub fn pca_fit(x: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "PCA needs at least 2 samples, got {n}"
        )));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter("ragged PCA input".into()));
    }
    if k == 0 || k > d.min(n) {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be in 1..={} for {n} samples of dimension {d}",
            d.min(n)
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite PCA input".into()));
    }
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    let (mut components, variances): (Vec<Vec<f64>>, Vec<f64>) = if d <= n {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        order
            .iter()
            .take(k)
            .map(|&i| {
                (
                    eig.eigenvectors.column(i).iter().copied().collect(),
                    eig.eigenvalues[i].max(0.0),
                )
            })
            .unzip()
    } else {
        // Gram trick: eigenvectors of X Xᵀ mapped back through Xᵀ
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        order
            .iter()
            .take(k)
            .map(|&i| {
                let u: DVector<f64> = eig.eigenvectors.column(i).into_owned();
                let v = centered.transpose() * u;
                (v.iter().copied().collect(), eig.eigenvalues[i].max(0.0))
            })
            .unzip()
    };
    orthonormalize(&mut components, d);
    components.iter_mut().for_each(|c| orient(c));
    Ok(PcaModel {
        mean,
        components,
        explained_variance: variances,
    })
}
