use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mean, accumulated relative to the first sample so that
/// constant input returns that constant exactly.
pub fn mean(x: &[f64]) -> f64 {
    let x0 = x[0];
    x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64
}

/// Population (1/N) standard deviation.
pub fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Linear-interpolation percentile (`q` in [0, 100]) of unsorted data.
pub fn percentile(x: &[f64], q: f64) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Maps `x` onto [0, 1]. Fails on constant input.
pub fn min_max_scale(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::ConstantSignal);
    }
    Ok(x.iter().map(|v| (v - lo) / range).collect())
}

/// Level and difference statistics of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffMoments {
    pub mean: f64,
    pub std: f64,
    pub mean_abs_d1: f64,
    pub mean_abs_d1_norm: f64,
    pub mean_abs_d2: f64,
    pub mean_abs_d2_norm: f64,
}

impl DiffMoments {
    pub const NAMES: [&'static str; 6] = [
        "mean",
        "std",
        "mean_abs_d1",
        "mean_abs_d1_norm",
        "mean_abs_d2",
        "mean_abs_d2_norm",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.mean,
            self.std,
            self.mean_abs_d1,
            self.mean_abs_d1_norm,
            self.mean_abs_d2,
            self.mean_abs_d2_norm,
        ]
    }
}

fn mean_abs_diff(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    (0..n).map(|i| (x[i + lag] - x[i]).abs()).sum::<f64>() / n as f64
}

/// Mean, std, and mean absolute first/second differences, the latter two
/// also on the z-scored series. Second differences are taken two samples
/// apart. A zero-variance series has both normalized values defined as 0.
pub fn diff_moments(x: &[f64]) -> Result<DiffMoments> {
    if x.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            got: x.len(),
        });
    }
    let m = mean(x);
    let s = population_std(x);
    let d1 = mean_abs_diff(x, 1);
    let d2 = mean_abs_diff(x, 2);
    let (d1n, d2n) = if s > 0.0 { (d1 / s, d2 / s) } else { (0.0, 0.0) };
    Ok(DiffMoments {
        mean: m,
        std: s,
        mean_abs_d1: d1,
        mean_abs_d1_norm: d1n,
        mean_abs_d2: d2,
        mean_abs_d2_norm: d2n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_signal() {
        let d = diff_moments(&[3.0; 10]).unwrap();
        assert_eq!(d.to_vec(), vec![3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn alternating_signal() {
        let d = diff_moments(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(d.mean_abs_d1, 1.0);
        assert_eq!(d.mean_abs_d2, 0.0);
        assert_eq!(d.mean, 0.5);
        assert_eq!(d.std, 0.5);
        assert_eq!(d.mean_abs_d1_norm, 2.0);
    }

    #[test]
    fn too_short() {
        assert!(matches!(diff_moments(&[1.0, 2.0]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn percentile_linear_interpolation() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&v, 95.0) - 95.05).abs() < 1e-12);
        assert_eq!(percentile(&[4.0], 95.0), 4.0);
        assert_eq!(percentile(&[1.0, 3.0], 50.0), 2.0);
    }

    #[test]
    fn min_max_scale_rules() {
        assert_eq!(min_max_scale(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(matches!(min_max_scale(&[1.0, 1.0]), Err(Error::ConstantSignal)));
    }

    proptest! {
        #[test]
        fn normalized_moments_affine_invariant(
            x in prop::collection::vec(-100.0f64..100.0, 3..200),
            a in 0.01f64..100.0,
            b in -1000.0f64..1000.0,
        ) {
            let d = diff_moments(&x).unwrap();
            prop_assume!(d.std > 1e-6);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let e = diff_moments(&y).unwrap();
            prop_assert!((d.mean_abs_d1_norm - e.mean_abs_d1_norm).abs() <= 1e-6 * d.mean_abs_d1_norm.max(1.0));
            prop_assert!((d.mean_abs_d2_norm - e.mean_abs_d2_norm).abs() <= 1e-6 * d.mean_abs_d2_norm.max(1.0));
        }
    }
}
