//! Evaluation protocols: leave-one-subject-out, repeated 80/20 splits
//! (optionally over several datasets pooled together) and cross-dataset
//! transfer.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{
    check_consistency, families_of, Dataset, ExtractionConfig, Family, FamilyKind, FeatureSet, MissingPolicy,
    TrialFeatures,
};
use super::report::ExperimentReport;
use crate::data::{binarize, emotion_class, EmotionClass};
use crate::error::{Error, Result};
use crate::learn::{
    elm_train, lstm_train, metrics, pca_fit, ElmConfig, ElmModel, EpochLoss, FoldResult, LstmConfig, LstmModel,
    MinMaxScaler, Model, PcaModel,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Valence,
    Arousal,
    Liking,
    /// Four circumplex quadrants.
    Emotion,
}

impl Target {
    pub fn n_classes(self) -> usize {
        match self {
            Target::Emotion => 4,
            _ => 2,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Target::Emotion => EmotionClass::ALL.iter().map(|c| c.to_string()).collect(),
            _ => vec!["low".into(), "high".into()],
        }
    }

    /// Class index of a trial; `None` when the rating is not available.
    pub fn label(self, t: &TrialFeatures) -> Result<Option<usize>> {
        let l = &t.labels;
        let bin = |r: f64| binarize(r, l.scale_midpoint, t.scale);
        Ok(match self {
            Target::Valence => Some(bin(l.valence)?.index()),
            Target::Arousal => Some(bin(l.arousal)?.index()),
            Target::Liking => match l.liking {
                Some(r) => Some(bin(r)?.index()),
                None => None,
            },
            Target::Emotion => Some(emotion_class(bin(l.valence)?, bin(l.arousal)?).index()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    Loso {},
    Split {
        #[serde(default = "default_folds")]
        folds: usize,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    /// Repeated splits over several datasets pooled together.
    Combined {
        #[serde(default = "default_folds")]
        folds: usize,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    Transfer {
        train_sets: Vec<String>,
        test_set: String,
    },
}

fn default_folds() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    0.2
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Loso {} => "loso",
            Protocol::Split { .. } => "split",
            Protocol::Combined { .. } => "combined",
            Protocol::Transfer { .. } => "transfer",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Hidden width and ridge; the seed is derived per fold.
    pub elm: ElmConfig,
    /// When non-empty, the hidden width is picked from this grid on a
    /// held-out 20% of each training fold.
    pub hidden_grid: Vec<usize>,
    pub lstm: LstmConfig,
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub feature_sets: Vec<FeatureSet>,
    pub target: Target,
    pub protocol: Protocol,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    /// Permutes labels across trials before evaluation (chance control).
    #[serde(default)]
    pub shuffle_labels: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "experiment".into()
}

impl ExperimentSpec {
    pub fn new(feature_sets: Vec<FeatureSet>, target: Target, protocol: Protocol) -> Self {
        ExperimentSpec {
            name: default_name(),
            feature_sets,
            target,
            protocol,
            classifier: ClassifierConfig::default(),
            extraction: ExtractionConfig::default(),
            missing_policy: MissingPolicy::default(),
            shuffle_labels: false,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::parse("experiment spec", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn uses_lstm(&self) -> bool {
        self.feature_sets.contains(&FeatureSet::EegFaceLstm)
    }

    /// Structural checks that need no data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidExperiment(m));
        if self.feature_sets.is_empty() {
            return bad("no feature sets selected".into());
        }
        if self.uses_lstm() && self.feature_sets.len() > 1 {
            return bad("the LSTM feature set cannot be fused with other feature sets".into());
        }
        match &self.protocol {
            Protocol::Split { folds, test_fraction } | Protocol::Combined { folds, test_fraction } => {
                if *folds == 0 {
                    return bad("split protocol needs at least one fold".into());
                }
                if !(*test_fraction > 0.0 && *test_fraction < 1.0) {
                    return bad(format!("test fraction {test_fraction} must be in (0, 1)"));
                }
            }
            Protocol::Transfer { train_sets, test_set } => {
                if train_sets.is_empty() {
                    return bad("transfer needs at least one training set".into());
                }
                if train_sets.contains(test_set) {
                    return bad(format!("dataset {test_set} is both a training and the test set"));
                }
            }
            Protocol::Loso {} => {}
        }
        if self.extraction.deep_dim == 0 || self.extraction.sequence_dim == 0 {
            return bad("PCA output widths must be positive".into());
        }
        Ok(())
    }
}

enum Classifier {
    Elm(ElmModel),
    Lstm {
        pca: PcaModel,
        scaler: MinMaxScaler,
        model: LstmModel,
    },
}

/// Reducers, scaler and classifier fitted on one training set. Scoring
/// handles one trial at a time, so test trials never influence each other.
pub struct FittedPipeline {
    widths: Vec<(Family, usize)>,
    reducers: Vec<Option<PcaModel>>,
    scaler: Option<MinMaxScaler>,
    classifier: Classifier,
    loss_curve: Vec<EpochLoss>,
}

fn concat_features(t: &TrialFeatures, reducers: &[Option<PcaModel>]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for ((_, b), r) in t.blocks.iter().zip(reducers) {
        match r {
            Some(p) => out.extend(p.transform(&b.values)?),
            None => out.extend_from_slice(&b.values),
        }
    }
    Ok(out)
}

fn sequence_of(t: &TrialFeatures) -> Result<&Vec<Vec<f64>>> {
    t.sequence
        .as_ref()
        .ok_or_else(|| Error::InvalidExperiment(format!("{} has no per-second features", t.key)))
}

fn reduce_sequence(seq: &[Vec<f64>], pca: &PcaModel, scaler: &MinMaxScaler) -> Result<Vec<Vec<f64>>> {
    seq.iter().map(|r| scaler.apply(&pca.transform(r)?)).collect()
}

impl FittedPipeline {
    pub fn fit(
        train: &[&TrialFeatures],
        labels: &[usize],
        n_classes: usize,
        spec: &ExperimentSpec,
        seed: u64,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidExperiment("empty training set".into()));
        }
        if spec.uses_lstm() {
            return Self::fit_lstm(train, labels, n_classes, spec, seed);
        }
        let n = train.len();
        let reducers: Vec<Option<PcaModel>> = train[0]
            .blocks
            .iter()
            .enumerate()
            .map(|(i, (f, b))| {
                if f.kind() != FamilyKind::Embedding {
                    return Ok(None);
                }
                let rows: Vec<Vec<f64>> = train.iter().map(|t| t.blocks[i].1.values.clone()).collect();
                let k = spec.extraction.deep_dim.min(n).min(b.len());
                pca_fit(&rows, k)
                    .map(Some)
                    .map_err(|e| e.context(format!("PCA for {}", b.method)))
            })
            .collect::<Result<_>>()?;
        let widths = train[0]
            .blocks
            .iter()
            .zip(&reducers)
            .map(|((f, b), r)| (*f, r.as_ref().map_or(b.len(), PcaModel::output_dim)))
            .collect();
        let x: Vec<Vec<f64>> = train
            .iter()
            .map(|t| concat_features(t, &reducers))
            .collect::<Result<_>>()?;
        let scaler = MinMaxScaler::fit(&x)?;
        let x = scaler.apply_all(&x)?;
        let hidden = select_hidden(&x, labels, n_classes, &spec.classifier, seed)?;
        let cfg = ElmConfig {
            hidden,
            ridge: spec.classifier.elm.ridge,
            seed: rng::derive_seed(seed, "elm", 0),
        };
        let model = elm_train(&x, labels, n_classes, &cfg)?;
        Ok(FittedPipeline {
            widths,
            reducers,
            scaler: Some(scaler),
            classifier: Classifier::Elm(model),
            loss_curve: Vec::new(),
        })
    }

    fn fit_lstm(
        train: &[&TrialFeatures],
        labels: &[usize],
        n_classes: usize,
        spec: &ExperimentSpec,
        seed: u64,
    ) -> Result<Self> {
        let seqs: Vec<&Vec<Vec<f64>>> = train.iter().map(|t| sequence_of(t)).collect::<Result<_>>()?;
        let steps = seqs[0].len();
        if let Some(t) = train.iter().zip(&seqs).find(|(_, s)| s.len() != steps) {
            return Err(Error::InvalidExperiment(format!(
                "the LSTM path needs equal-length trials: {} has {} seconds, expected {steps}",
                t.0.key,
                t.1.len()
            )));
        }
        let mut rows: Vec<&Vec<f64>> = seqs.iter().flat_map(|s| s.iter()).collect();
        let cap = spec.extraction.sequence_pca_rows.max(1);
        if rows.len() > cap {
            rows.shuffle(&mut rng::stream(seed, "sequence-pca", 0));
            rows.truncate(cap);
        }
        let rows: Vec<Vec<f64>> = rows.into_iter().cloned().collect();
        let k = spec.extraction.sequence_dim.min(rows.len()).min(rows[0].len());
        let pca = pca_fit(&rows, k)?;
        let all: Vec<Vec<f64>> = seqs
            .iter()
            .flat_map(|s| s.iter())
            .map(|r| pca.transform(r))
            .collect::<Result<_>>()?;
        let scaler = MinMaxScaler::fit(&all)?;
        let reduced: Vec<Vec<Vec<f64>>> = seqs
            .iter()
            .map(|s| reduce_sequence(s, &pca, &scaler))
            .collect::<Result<_>>()?;
        let mut cfg = spec.classifier.lstm.clone();
        cfg.seed = rng::derive_seed(seed, "lstm", 0);
        let (model, loss_curve) = lstm_train(&reduced, labels, n_classes, &cfg)?;
        Ok(FittedPipeline {
            widths: vec![(Family::EegFaceSequence, pca.output_dim())],
            reducers: Vec::new(),
            scaler: None,
            classifier: Classifier::Lstm { pca, scaler, model },
            loss_curve,
        })
    }

    /// Classifier-side width of each family after reduction. For the LSTM
    /// path this is the per-second width.
    pub fn feature_widths(&self) -> &[(Family, usize)] {
        &self.widths
    }

    /// Per-epoch losses of the LSTM path; empty for the ELM.
    pub fn loss_curve(&self) -> &[EpochLoss] {
        &self.loss_curve
    }

    /// Every fitted component in application order, named for saving.
    pub fn models(&self) -> Vec<(String, Model)> {
        let mut out = Vec::new();
        for ((f, _), r) in self.widths.iter().zip(&self.reducers) {
            if let Some(p) = r {
                out.push((format!("pca_{}", f.method()), Model::Pca(p.clone())));
            }
        }
        if let Some(s) = &self.scaler {
            out.push(("scaler".into(), Model::Scaler(s.clone())));
        }
        match &self.classifier {
            Classifier::Elm(m) => out.push(("elm".into(), Model::Elm(m.clone()))),
            Classifier::Lstm { pca, scaler, model } => {
                out.push(("pca_sequence".into(), Model::Pca(pca.clone())));
                out.push(("scaler_sequence".into(), Model::Scaler(scaler.clone())));
                out.push(("lstm".into(), Model::Lstm(model.clone())));
            }
        }
        out
    }

    pub fn predict(&self, t: &TrialFeatures) -> Result<usize> {
        match &self.classifier {
            Classifier::Elm(m) => {
                let x = concat_features(t, &self.reducers)?;
                let x = self.scaler.as_ref().expect("ELM pipelines carry a scaler").apply(&x)?;
                Ok(m.predict(&x)?.0)
            }
            Classifier::Lstm { pca, scaler, model } => model.predict(&reduce_sequence(sequence_of(t)?, pca, scaler)?),
        }
    }
}

fn select_hidden(
    x: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<usize> {
    if cfg.hidden_grid.is_empty() {
        return Ok(cfg.elm.hidden);
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.shuffle(&mut rng::stream(seed, "hidden-select", 0));
    let n_val = (x.len() / 5).max(1);
    let (val, fit) = idx.split_at(n_val);
    let classes: BTreeSet<usize> = fit.iter().map(|&i| labels[i]).collect();
    if fit.is_empty() || classes.len() < 2 {
        return Ok(cfg.elm.hidden);
    }
    let xf: Vec<Vec<f64>> = fit.iter().map(|&i| x[i].clone()).collect();
    let yf: Vec<usize> = fit.iter().map(|&i| labels[i]).collect();
    let mut best = (usize::MAX, cfg.hidden_grid[0]);
    for &h in &cfg.hidden_grid {
        let m = elm_train(
            &xf,
            &yf,
            n_classes,
            &ElmConfig {
                hidden: h,
                ridge: cfg.elm.ridge,
                seed: rng::derive_seed(seed, "elm", 0),
            },
        )?;
        let mut errors = 0;
        for &i in val {
            if m.predict(&x[i])?.0 != labels[i] {
                errors += 1;
            }
        }
        if errors < best.0 {
            best = (errors, h);
        }
    }
    Ok(best.1)
}

/// Trials with a label for `spec.target`, after the optional shuffle.
struct Labeled<'a> {
    trials: Vec<&'a TrialFeatures>,
    /// Position of each kept trial in the input list.
    origin: Vec<usize>,
    labels: Vec<usize>,
    skipped: Vec<super::features::SkippedTrial>,
}

fn labeled<'a>(trials: Vec<&'a TrialFeatures>, spec: &ExperimentSpec) -> Result<Labeled<'a>> {
    let mut out = Labeled {
        trials: Vec::new(),
        origin: Vec::new(),
        labels: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, t) in trials.into_iter().enumerate() {
        match spec.target.label(t)? {
            Some(l) => {
                out.trials.push(t);
                out.origin.push(i);
                out.labels.push(l);
            }
            None => out.skipped.push(super::features::SkippedTrial {
                key: t.key.clone(),
                reason: "no liking rating".into(),
            }),
        }
    }
    if spec.target == Target::Liking && out.trials.is_empty() {
        return Err(Error::InvalidExperiment(
            "liking target but no dataset provides liking".into(),
        ));
    }
    if spec.shuffle_labels {
        out.labels.shuffle(&mut rng::stream(spec.seed, "label-shuffle", 0));
    }
    Ok(out)
}

fn liking_check(datasets: &[&Dataset], spec: &ExperimentSpec) -> Result<()> {
    if spec.target != Target::Liking {
        return Ok(());
    }
    for d in datasets {
        if !d.trials.is_empty() && d.trials.iter().all(|t| t.labels.liking.is_none()) {
            return Err(Error::InvalidExperiment(format!(
                "dataset {} provides no liking ratings",
                d.id
            )));
        }
    }
    Ok(())
}

fn check_families(datasets: &[&Dataset], spec: &ExperimentSpec) -> Result<()> {
    let fams = families_of(&spec.feature_sets);
    for d in datasets {
        if let Some(t) = d.trials.first() {
            let got: Vec<_> = t.blocks.iter().map(|b| b.0).collect();
            let want: Vec<_> = fams
                .iter()
                .copied()
                .filter(|f| f.kind() != FamilyKind::Sequence)
                .collect();
            if got != want {
                return Err(Error::InvalidExperiment(format!(
                    "dataset {} was extracted for different feature sets",
                    d.id
                )));
            }
        }
    }
    Ok(())
}

struct FoldOutput {
    result: FoldResult,
    preds: Vec<usize>,
    truth: Vec<usize>,
}

fn run_fold(
    name: String,
    train: &[usize],
    test: &[usize],
    data: &Labeled<'_>,
    spec: &ExperimentSpec,
    seed: u64,
) -> Result<FoldOutput> {
    let n_classes = spec.target.n_classes();
    let tr: Vec<&TrialFeatures> = train.iter().map(|&i| data.trials[i]).collect();
    let y: Vec<usize> = train.iter().map(|&i| data.labels[i]).collect();
    let pipe = FittedPipeline::fit(&tr, &y, n_classes, spec, seed).map_err(|e| e.context(format!("fold {name}")))?;
    let preds: Vec<usize> = test
        .iter()
        .map(|&i| pipe.predict(data.trials[i]))
        .collect::<Result<_>>()?;
    let truth: Vec<usize> = test.iter().map(|&i| data.labels[i]).collect();
    let r = metrics(&preds, &truth, n_classes)?;
    Ok(FoldOutput {
        result: FoldResult {
            fold: name,
            n_test: test.len(),
            accuracy: r.accuracy,
            macro_f1: r.macro_f1,
        },
        preds,
        truth,
    })
}

fn assemble(
    spec: &ExperimentSpec,
    datasets: &[&Dataset],
    folds: Vec<FoldOutput>,
    extra_skipped: Vec<super::features::SkippedTrial>,
    warnings: Vec<String>,
) -> Result<ExperimentReport> {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    let mut per_fold = Vec::new();
    for f in folds {
        preds.extend(f.preds);
        truth.extend(f.truth);
        per_fold.push(f.result);
    }
    if preds.is_empty() {
        return Err(Error::InvalidExperiment("no fold produced predictions".into()));
    }
    let mut eval = metrics(&preds, &truth, spec.target.n_classes())?;
    eval.per_fold = per_fold;
    let mut skipped: Vec<_> = datasets.iter().flat_map(|d| d.skipped.iter().cloned()).collect();
    skipped.extend(extra_skipped);
    Ok(ExperimentReport::new(
        spec,
        datasets.iter().map(|d| d.id.clone()).collect(),
        eval,
        skipped,
        warnings,
    ))
}

/// Leave-one-subject-out over every subject of every dataset; predictions
/// of all folds are pooled into one report.
pub fn run_loso(datasets: &[&Dataset], spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    check_families(datasets, spec)?;
    liking_check(datasets, spec)?;
    let all: Vec<&TrialFeatures> = datasets.iter().flat_map(|d| d.trials.iter()).collect();
    check_consistency(all.iter().copied())?;
    let data = labeled(all, spec)?;
    let mut subjects: Vec<(String, String)> = Vec::new();
    for d in datasets {
        for t in &d.trials {
            let s = (t.dataset_id.clone(), t.subject_id.clone());
            if !subjects.contains(&s) {
                subjects.push(s);
            }
        }
    }
    if subjects.len() < 2 {
        return Err(Error::InvalidExperiment(format!(
            "leave-one-subject-out needs at least 2 subjects with usable trials, got {}",
            subjects.len()
        )));
    }
    let multi = datasets.len() > 1;
    let outputs: Vec<Result<Option<FoldOutput>>> = subjects
        .par_iter()
        .enumerate()
        .map(|(k, (ds, subj))| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.trials.len())
                .partition(|&i| &data.trials[i].dataset_id == ds && &data.trials[i].subject_id == subj);
            if test.is_empty() {
                return Ok(None);
            }
            let name = if multi { format!("{ds}/{subj}") } else { subj.clone() };
            run_fold(
                name,
                &train,
                &test,
                &data,
                spec,
                rng::derive_seed(spec.seed, "loso", k as u64),
            )
            .map(Some)
        })
        .collect();
    let mut folds = Vec::new();
    let mut warnings = Vec::new();
    for (o, (ds, subj)) in outputs.into_iter().zip(&subjects) {
        match o? {
            Some(f) => folds.push(f),
            None => warnings.push(format!("subject {ds}/{subj} has no usable trials; fold skipped")),
        }
    }
    assemble(spec, datasets, folds, data.skipped, warnings)
}

/// Draws a train/test partition, redrawing (up to 10 times) while a class
/// is missing from the training part.
fn draw_split(
    labels: &[usize],
    n_classes: usize,
    test_fraction: f64,
    seed: u64,
    fold: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    for attempt in 0..=10u64 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::stream(seed, &format!("split-{fold}"), attempt));
        let (test, train) = idx.split_at(n_test);
        let present: BTreeSet<usize> = train.iter().map(|&i| labels[i]).collect();
        let needed: BTreeSet<usize> = labels.iter().copied().collect();
        if present.len() == needed.len().min(n_classes) {
            let mut train = train.to_vec();
            let mut test = test.to_vec();
            train.sort_unstable();
            test.sort_unstable();
            return Ok((train, test));
        }
    }
    Err(Error::InvalidExperiment(format!(
        "split {fold}: a class is absent from the training part after 10 redraws"
    )))
}

/// Repeated seeded 80/20 splits over the pooled trials of `datasets`.
pub fn run_split(datasets: &[&Dataset], spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (folds, test_fraction) = match spec.protocol {
        Protocol::Split { folds, test_fraction } | Protocol::Combined { folds, test_fraction } => {
            (folds, test_fraction)
        }
        _ => (default_folds(), default_test_fraction()),
    };
    check_families(datasets, spec)?;
    liking_check(datasets, spec)?;
    let all: Vec<&TrialFeatures> = datasets.iter().flat_map(|d| d.trials.iter()).collect();
    check_consistency(all.iter().copied())?;
    let data = labeled(all, spec)?;
    if data.trials.len() < 2 {
        return Err(Error::InvalidExperiment("need at least 2 labelled trials".into()));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| draw_split(&data.labels, spec.target.n_classes(), test_fraction, spec.seed, f))
        .collect::<Result<_>>()?;
    let outputs: Vec<FoldOutput> = splits
        .par_iter()
        .enumerate()
        .map(|(f, (train, test))| {
            run_fold(
                format!("split_{f}"),
                train,
                test,
                &data,
                spec,
                rng::derive_seed(spec.seed, "split-fold", f as u64),
            )
        })
        .collect::<Result<_>>()?;
    assemble(spec, datasets, outputs, data.skipped, Vec::new())
}

/// Fits on every trial of the training datasets and scores the whole test
/// dataset once.
pub fn run_transfer(train: &[&Dataset], test: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    if train.iter().any(|d| d.id == test.id) {
        return Err(Error::InvalidExperiment(format!(
            "dataset {} is both a training and the test set",
            test.id
        )));
    }
    let mut sets: Vec<&Dataset> = train.to_vec();
    sets.push(test);
    check_families(&sets, spec)?;
    liking_check(&sets, spec)?;
    check_consistency(sets.iter().flat_map(|d| d.trials.iter()))?;
    let n_train = train.iter().map(|d| d.trials.len()).sum::<usize>();
    let all: Vec<&TrialFeatures> = sets.iter().flat_map(|d| d.trials.iter()).collect();
    let data = labeled(all, spec)?;
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) =
        (0..data.trials.len()).partition(|&i| data.origin[i] < n_train);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::InvalidExperiment(
            "transfer needs labelled trials on both sides".into(),
        ));
    }
    let fold = run_fold(
        "transfer".into(),
        &train_idx,
        &test_idx,
        &data,
        spec,
        rng::derive_seed(spec.seed, "transfer", 0),
    )?;
    assemble(spec, &sets, vec![fold], data.skipped, Vec::new())
}

/// Runs `spec.protocol` on already extracted datasets.
pub fn run_experiment(datasets: &[Dataset], spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let refs: Vec<&Dataset> = datasets.iter().collect();
    match &spec.protocol {
        Protocol::Loso {} => run_loso(&refs, spec),
        Protocol::Split { .. } => run_split(&refs, spec),
        Protocol::Combined { .. } => {
            if refs.len() < 2 {
                return Err(Error::InvalidExperiment(
                    "combined protocol needs at least two datasets".into(),
                ));
            }
            run_split(&refs, spec)
        }
        Protocol::Transfer { train_sets, test_set } => {
            let find = |id: &str| {
                refs.iter()
                    .copied()
                    .find(|d| d.id == id)
                    .ok_or_else(|| Error::InvalidExperiment(format!("dataset {id} not loaded")))
            };
            let train: Vec<&Dataset> = train_sets.iter().map(|s| find(s)).collect::<Result<_>>()?;
            run_transfer(&train, find(test_set)?, spec)
        }
    }
}

/// Fits one pipeline on every labelled training trial: all datasets, or
/// the training sets of a transfer protocol.
pub fn fit_final(datasets: &[Dataset], spec: &ExperimentSpec) -> Result<FittedPipeline> {
    spec.validate()?;
    let train: Vec<&Dataset> = match &spec.protocol {
        Protocol::Transfer { train_sets, .. } => datasets.iter().filter(|d| train_sets.contains(&d.id)).collect(),
        _ => datasets.iter().collect(),
    };
    if train.is_empty() {
        return Err(Error::InvalidExperiment("no training datasets loaded".into()));
    }
    check_families(&train, spec)?;
    liking_check(&train, spec)?;
    check_consistency(train.iter().flat_map(|d| d.trials.iter()))?;
    let data = labeled(train.iter().flat_map(|d| d.trials.iter()).collect(), spec)?;
    if data.trials.is_empty() {
        return Err(Error::InvalidExperiment("no labelled training trials".into()));
    }
    FittedPipeline::fit(
        &data.trials,
        &data.labels,
        spec.target.n_classes(),
        spec,
        rng::derive_seed(spec.seed, "final", 0),
    )
}

/// Random labels for tests of chance behaviour.
pub fn random_labels(n: usize, n_classes: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::stream(seed, "random-labels", 0);
    (0..n).map(|_| r.gen_range(0..n_classes)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureBlock, TrialLabels};
    use crate::harness::features::Family;

    fn trial(subject: usize, k: usize, valence: f64, x: Vec<f64>) -> TrialFeatures {
        TrialFeatures {
            key: format!("d/s{subject}/t{k}"),
            dataset_id: "d".into(),
            subject_id: format!("s{subject}"),
            trial_id: format!("t{k}"),
            labels: TrialLabels {
                valence,
                arousal: 5.0,
                liking: None,
                scale_midpoint: 5.0,
            },
            scale: (1.0, 9.0),
            blocks: vec![(
                Family::EegPsd,
                FeatureBlock::indexed(format!("t{k}"), "EEG", "eeg_psd", "f", x),
            )],
            sequence: None,
        }
    }

    /// Five subjects, class encoded in feature 0 with per-subject offsets.
    fn toy() -> Dataset {
        let mut r = rng::stream(1, "toy", 0);
        let mut trials = Vec::new();
        for s in 0..5 {
            for k in 0..20 {
                let high = k % 2 == 0;
                let v = if high { 7.0 } else { 3.0 };
                let x = vec![
                    if high { 1.0 } else { -1.0 } + r.gen_range(-0.5..0.5),
                    r.gen_range(-1.0..1.0),
                    s as f64 * 0.1,
                ];
                trials.push(trial(s, k, v, x));
            }
        }
        Dataset {
            id: "d".into(),
            trials,
            skipped: Vec::new(),
            cache_hits: 0,
            cache_misses: 0,
        }
    }

    fn spec(protocol: Protocol) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(vec![FeatureSet::EegPsd], Target::Valence, protocol);
        s.classifier.elm.hidden = 50;
        s
    }

    #[test]
    fn loso_partitions_trials() {
        let d = toy();
        let r = run_loso(&[&d], &spec(Protocol::Loso {})).unwrap();
        assert_eq!(r.evaluation.per_fold.len(), 5);
        assert_eq!(r.evaluation.per_fold.iter().map(|f| f.n_test).sum::<usize>(), 100);
        assert_eq!(r.evaluation.n_samples(), 100);
        assert!(r.evaluation.accuracy >= 90.0, "{}", r.evaluation.accuracy);
    }

    #[test]
    fn loso_needs_two_subjects() {
        let mut d = toy();
        d.trials.retain(|t| t.subject_id == "s0");
        assert!(matches!(
            run_loso(&[&d], &spec(Protocol::Loso {})),
            Err(Error::InvalidExperiment(_))
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = toy();
        let s = spec(Protocol::Split {
            folds: 10,
            test_fraction: 0.2,
        });
        let a = run_split(&[&d], &s).unwrap();
        assert_eq!(a.evaluation.per_fold.len(), 10);
        assert!(a.evaluation.per_fold.iter().all(|f| f.n_test == 20));
        let b = run_split(&[&d], &s).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn split_redraws_until_classes_present() {
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let (train, test) = draw_split(&labels, 2, 0.2, 3, 0).unwrap();
        assert!(train.iter().any(|&i| labels[i] == 1));
        assert_eq!(test.len(), 2);
        // A one-trial training part can never hold both classes.
        assert!(matches!(
            draw_split(&[0, 0, 1], 2, 0.5, 0, 0),
            Err(Error::InvalidExperiment(_))
        ));
    }

    #[test]
    fn shuffled_labels_near_chance() {
        let d = toy();
        let mut s = spec(Protocol::Loso {});
        s.shuffle_labels = true;
        let r = run_loso(&[&d], &s).unwrap();
        let half = 2.0 * 1.96 * (0.25f64 / 100.0).sqrt() * 100.0;
        assert!(
            (r.evaluation.accuracy - 50.0).abs() <= half,
            "{}",
            r.evaluation.accuracy
        );
    }

    #[test]
    fn transfer_detects_mismatch_and_overlap() {
        let a = toy();
        let mut b = toy();
        b.id = "e".into();
        for t in &mut b.trials {
            t.dataset_id = "e".into();
            t.blocks[0].1.names[2] = "other".into();
        }
        let s = spec(Protocol::Transfer {
            train_sets: vec!["d".into()],
            test_set: "e".into(),
        });
        match run_transfer(&[&a], &b, &s) {
            Err(Error::FeatureSetMismatch { block, .. }) => assert_eq!(block, "eeg_psd"),
            other => panic!("{other:?}"),
        }
        let mut c = toy();
        c.id = "e".into();
        let r = run_transfer(&[&a], &c, &s).unwrap();
        assert_eq!(r.evaluation.n_samples(), 100);
        assert!(run_transfer(&[&a], &a, &s).is_err());
    }

    #[test]
    fn scoring_is_per_trial() {
        let d = toy();
        let refs: Vec<&TrialFeatures> = d.trials.iter().take(60).collect();
        let y: Vec<usize> = refs
            .iter()
            .map(|t| Target::Valence.label(t).unwrap().unwrap())
            .collect();
        let p = FittedPipeline::fit(&refs, &y, 2, &spec(Protocol::Loso {}), 7).unwrap();
        let forward: Vec<usize> = d.trials[60..].iter().map(|t| p.predict(t).unwrap()).collect();
        let backward: Vec<usize> = d.trials[60..].iter().rev().map(|t| p.predict(t).unwrap()).collect();
        assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(Protocol::Loso {});
        s.feature_sets.push(FeatureSet::EegFaceLstm);
        assert!(s.validate().is_err());
        let t = spec(Protocol::Transfer {
            train_sets: vec!["a".into()],
            test_set: "a".into(),
        });
        assert!(t.validate().is_err());
        let json = spec(Protocol::Split {
            folds: 10,
            test_fraction: 0.2,
        })
        .to_json();
        assert_eq!(ExperimentSpec::from_json(&json).unwrap().protocol.name(), "split");
        let minimal = r#"{"feature_sets":["eeg_topo"],"target":"valence","protocol":{"kind":"loso"}}"#;
        assert_eq!(ExperimentSpec::from_json(minimal).unwrap().classifier.elm.hidden, 500);
    }

    #[test]
    fn spec_json_is_strict_but_partial() {
        let base = r#""feature_sets":["eeg_topo"],"target":"valence","protocol":{"kind":"loso"}"#;
        let partial = format!(r#"{{{base},"classifier":{{"lstm":{{"epochs":3}},"elm":{{"hidden":40}}}}}}"#);
        let s = ExperimentSpec::from_json(&partial).unwrap();
        assert_eq!(s.classifier.lstm.epochs, 3);
        assert_eq!(s.classifier.lstm.layers, LstmConfig::default().layers);
        assert_eq!(s.classifier.elm.hidden, 40);
        for extra in [
            r#""lstm":{"epochs":3}"#,
            r#""classifier":{"hiden_grid":[10]}"#,
            r#""extraction":{"psd":{"win":2.0}}"#,
        ] {
            let text = format!("{{{base},{extra}}}");
            let err = ExperimentSpec::from_json(&text).unwrap_err().to_string();
            assert!(err.contains("unknown field"), "{extra}: {err}");
        }
        let bad_protocol = r#"{"feature_sets":["eeg_topo"],"target":"valence","protocol":{"kind":"loso","folds":3}}"#;
        assert!(ExperimentSpec::from_json(bad_protocol).is_err());
    }

    #[test]
    fn liking_needs_ratings() {
        let d = toy();
        let mut s = spec(Protocol::Loso {});
        s.target = Target::Liking;
        assert!(matches!(run_loso(&[&d], &s), Err(Error::InvalidExperiment(_))));
    }
}
