//! Fusion, evaluation protocols and synthetic datasets.

mod features;
mod fusion;
mod protocol;
mod report;
mod synth;

pub use features::{
    check_consistency, extract_dataset, families_of, load_face_frames, BlockCache, Dataset, ExtractionConfig, Family,
    FamilyKind, FeatureSet, MissingPolicy, SkippedTrial, Source, TrialFeatures,
};
pub use fusion::{fuse, split_fused};
pub use protocol::{
    fit_final, random_labels, run_experiment, run_loso, run_split, run_transfer, ClassifierConfig, ExperimentSpec,
    FittedPipeline, Protocol, Target,
};
pub use report::{binomial_ci95, chance_halfwidth95, welch_t_test, ExperimentReport, TTest};
pub use synth::{
    default_effects, synth_generate, EffectAxis, EffectFeature, Montage, PlantedEffect, SynthConfig, SynthModalities,
};
