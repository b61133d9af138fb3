//! Experiment reports and the small amount of statistics around them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::features::{FeatureSet, MissingPolicy, SkippedTrial};
use super::protocol::{ExperimentSpec, Target};
use crate::dsp::{mean, population_std};
use crate::error::{Error, Result};
use crate::learn::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub protocol: String,
    pub target: Target,
    pub feature_sets: Vec<FeatureSet>,
    pub datasets: Vec<String>,
    pub class_names: Vec<String>,
    pub seed: u64,
    pub missing_policy: MissingPolicy,
    /// Pooled over all folds; per-fold figures are kept inside.
    pub evaluation: EvalReport,
    /// 95% interval of the pooled accuracy (percent).
    pub accuracy_ci95: [f64; 2],
    pub fold_accuracy_mean: f64,
    pub fold_accuracy_std: f64,
    pub fold_macro_f1_mean: f64,
    pub fold_macro_f1_std: f64,
    pub skipped: Vec<SkippedTrial>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(
        spec: &ExperimentSpec,
        datasets: Vec<String>,
        evaluation: EvalReport,
        skipped: Vec<SkippedTrial>,
        warnings: Vec<String>,
    ) -> Self {
        let accs: Vec<f64> = evaluation.per_fold.iter().map(|f| f.accuracy).collect();
        let f1s: Vec<f64> = evaluation.per_fold.iter().map(|f| f.macro_f1).collect();
        let stat = |v: &[f64]| {
            if v.is_empty() {
                (0.0, 0.0)
            } else {
                (mean(v), population_std(v))
            }
        };
        let (am, asd) = stat(&accs);
        let (fm, fsd) = stat(&f1s);
        let (lo, hi) = binomial_ci95(evaluation.accuracy / 100.0, evaluation.n_samples());
        ExperimentReport {
            name: spec.name.clone(),
            protocol: spec.protocol.name().into(),
            target: spec.target,
            feature_sets: spec.feature_sets.clone(),
            datasets,
            class_names: spec.target.class_names(),
            seed: spec.seed,
            missing_policy: spec.missing_policy,
            accuracy_ci95: [100.0 * lo, 100.0 * hi],
            evaluation,
            fold_accuracy_mean: am,
            fold_accuracy_std: asd,
            fold_macro_f1_mean: fm,
            fold_macro_f1_std: fsd,
            skipped,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("report", e.to_string()))
    }

    pub fn confusion_csv(&self) -> String {
        self.evaluation.confusion_csv(&self.class_names)
    }

    /// Human-readable summary.
    pub fn table(&self) -> String {
        let e = &self.evaluation;
        let mut s = String::new();
        let sets: Vec<String> = self
            .feature_sets
            .iter()
            .map(|f| serde_json::to_value(f).unwrap().as_str().unwrap().to_string())
            .collect();
        let _ = writeln!(s, "experiment  {}", self.name);
        let _ = writeln!(s, "protocol    {} on {}", self.protocol, self.datasets.join(", "));
        let _ = writeln!(s, "target      {:?}  features {}", self.target, sets.join("+"));
        let _ = writeln!(
            s,
            "trials      {} scored, {} skipped ({:?})",
            e.n_samples(),
            self.skipped.len(),
            self.missing_policy
        );
        let _ = writeln!(
            s,
            "accuracy    {:.2}%  (95% CI {:.2}-{:.2})  macro F1 {:.3}",
            e.accuracy, self.accuracy_ci95[0], self.accuracy_ci95[1], e.macro_f1
        );
        let _ = writeln!(
            s,
            "per fold    accuracy {:.2} +/- {:.2}  macro F1 {:.3} +/- {:.3}",
            self.fold_accuracy_mean, self.fold_accuracy_std, self.fold_macro_f1_mean, self.fold_macro_f1_std
        );
        let _ = writeln!(s);
        let w = self.class_names.iter().map(String::len).max().unwrap_or(4).max(5);
        let _ = write!(s, "{:>w$}", "");
        for c in &self.class_names {
            let _ = write!(s, " {c:>w$}");
        }
        let _ = writeln!(s);
        for (c, row) in self.class_names.iter().zip(&e.confusion) {
            let _ = write!(s, "{c:>w$}");
            for v in row {
                let _ = write!(s, " {v:>w$}");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<16} {:>6} {:>9} {:>9}", "fold", "n", "accuracy", "macro_f1");
        for f in &e.per_fold {
            let _ = writeln!(
                s,
                "{:<16} {:>6} {:>9.2} {:>9.3}",
                f.fold, f.n_test, f.accuracy, f.macro_f1
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Normal-approximation 95% interval for a proportion `p` over `n` trials,
/// clipped to [0, 1].
pub fn binomial_ci95(p: f64, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let half = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Half-width of the 95% interval around a chance rate `p0`.
pub fn chance_halfwidth95(p0: f64, n: usize) -> f64 {
    1.96 * (p0 * (1.0 - p0) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-sided Welch two-sample t-test, e.g. between per-fold accuracies of
/// two feature configurations.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParameter("each sample needs at least 2 values".into()));
    }
    let var = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (var(a) / na, var(b) / nb);
    let se2 = va + vb;
    if !(se2 > 0.0) {
        return Err(Error::Numerical("both samples have zero variance".into()));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TTest {
        t,
        df,
        p_value: 2.0 * dist.cdf(-t.abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_examples() {
        let (lo, hi) = binomial_ci95(0.5, 100);
        assert!((lo - 0.402).abs() < 1e-3 && (hi - 0.598).abs() < 1e-3);
        assert_eq!(binomial_ci95(1.0, 10), (1.0, 1.0));
        assert!((chance_halfwidth95(0.25, 200) - 0.06001).abs() < 1e-4);
    }

    #[test]
    fn welch_reference() {
        // scipy.stats.ttest_ind(a, b, equal_var=False): t -2.19089, p 0.0709877
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [3.0, 4.0, 5.0, 6.0];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t + 2.0 / (5.0f64 / 6.0).sqrt()).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-12);
        assert!((r.p_value - 0.070_987_654_320_987_55).abs() < 1e-9, "{}", r.p_value);
        assert!(welch_t_test(&[1.0], &b).is_err());
        assert!(welch_t_test(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }
}
