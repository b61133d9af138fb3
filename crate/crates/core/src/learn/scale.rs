use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature affine map of the training range onto [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let d = x.first().map(Vec::len).ok_or(Error::EmptySignal)?;
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in x {
            if r.len() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            for j in 0..d {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    /// Constant training features map to 0; values outside the training
    /// range are clipped.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.min.len() {
            return Err(Error::DimMismatch {
                expected: self.min.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn apply_all(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        let x = vec![vec![2.0, 5.0], vec![4.0, 5.0], vec![6.0, 5.0]];
        let s = MinMaxScaler::fit(&x).unwrap();
        let y = s.apply_all(&x).unwrap();
        assert_eq!(y.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        assert!(y.iter().all(|r| r[1] == 0.0));
        assert_eq!(s.apply(&[10.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(s.apply(&[-10.0, 1.0]).unwrap()[0], -1.0);
        assert!(s.apply(&[1.0]).is_err());
    }
}
