use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: String,
    pub n_test: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Classification summary. Accuracy is a percentage; confusion rows are
/// true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
    pub per_fold: Vec<FoldResult>,
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let k = confusion.len();
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("no predictions to score".into()));
        }
        let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
        let f1: f64 = (0..k)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let predicted: usize = confusion.iter().map(|r| r[c]).sum();
                let actual: usize = confusion[c].iter().sum();
                if predicted == 0 || actual == 0 || tp == 0.0 {
                    return 0.0;
                }
                let p = tp / predicted as f64;
                let r = tp / actual as f64;
                2.0 * p * r / (p + r)
            })
            .sum::<f64>()
            / k as f64;
        Ok(EvalReport {
            accuracy: 100.0 * trace as f64 / total as f64,
            macro_f1: f1,
            confusion,
            per_fold: Vec::new(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn confusion_csv(&self, class_names: &[String]) -> String {
        let mut s = String::from("truth\\pred");
        for n in class_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (n, row) in class_names.iter().zip(&self.confusion) {
            s.push_str(n);
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn metrics(preds: &[usize], truth: &[usize], n_classes: usize) -> Result<EvalReport> {
    if preds.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions vs {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidParameter("no predictions to score".into()));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in preds.iter().zip(truth) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::InvalidParameter(format!("class index out of range: {p}/{t}")));
        }
        confusion[t][p] += 1;
    }
    EvalReport::from_confusion(confusion)
}
