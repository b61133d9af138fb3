use crate::error::{Error, Result};

/// Local maxima of `signal` at least `min_height` tall and at least
/// `min_dist_s` apart. Flat-topped peaks report their middle sample. When
/// two candidates are too close the taller one wins, ties going to the
/// earlier one. Returned indices are ascending.
pub fn detect_peaks(signal: &[f64], fs: f64, min_dist_s: f64, min_height: f64) -> Result<Vec<usize>> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    if !(min_dist_s > 0.0) || !(fs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "peak distance {min_dist_s} s and fs {fs} Hz must be positive"
        )));
    }
    let n = signal.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if signal[i] > signal[i - 1] {
            // walk across a possible plateau
            let mut j = i;
            while j + 1 < n && signal[j + 1] == signal[i] {
                j += 1;
            }
            if j + 1 < n && signal[j + 1] < signal[i] {
                let mid = i + (j - i) / 2;
                if signal[mid] >= min_height {
                    candidates.push(mid);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    let min_dist = min_dist_s * fs;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // tallest first, earlier index first among equals
    order.sort_by(|&a, &b| {
        signal[candidates[b]]
            .total_cmp(&signal[candidates[a]])
            .then(candidates[a].cmp(&candidates[b]))
    });
    let mut keep = vec![true; candidates.len()];
    for &k in &order {
        if !keep[k] {
            continue;
        }
        let p = candidates[k];
        for (other, flag) in keep.iter_mut().enumerate() {
            if other != k && *flag && ((candidates[other] as f64 - p as f64).abs() < min_dist) {
                *flag = false;
            }
        }
    }
    Ok(candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect())
}
