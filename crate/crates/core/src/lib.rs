//! Detect and mitigate protected-attribute bias in the scores of a black-box
//! binary classifier with a recursive causal path model.
//!
//! The pipeline: [`ingest`] and [`encoding`] turn a raw table into a
//! [`FairnessDataset`]; a scorer ([`logistic`] or an external score file)
//! produces scores `ŷ`; [`path_model`] fits
//! `ŷ ~ 1 + a + y` and `y ~ 1 + a` and tests the direct `a → ŷ` path;
//! [`mitigation`] subtracts that path and re-thresholds; [`metrics`] compares
//! equal-opportunity rates and accuracy before and after; [`audit`] runs it all
//! and produces a [`report::FairnessReport`].
//!
//! The numeric types are generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the audit pipeline uses.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod config;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod logistic;
pub mod metrics;
pub mod mitigation;
pub mod path_model;
pub mod report;
pub mod scalar;
pub mod scores;
pub mod synth;

pub use audit::{run_audit, AuditRun};
pub use config::{AuditConfig, ScorerChoice};
pub use dataset::{FairnessDataset, Provenance};
pub use encoding::{build_schema, encode, EncodingSchema, SchemaConfig};
pub use error::{Error, ErrorKind, Result};
pub use ingest::{load_adult_csv, RawTable, Variant};
pub use logistic::{fit_logistic, predict, LogisticModel, LogisticOptions};
pub use metrics::{
    accuracy, equal_opportunity, grouped_confusion, EqualOpportunity, GroupedConfusion,
};
pub use mitigation::{
    apply_mitigation, classify, derive_policy, ClassifiedScores, MitigationPolicy, PolicyOptions,
    RankBasis,
};
pub use path_model::{fit_path_model, ols_with_se, test_bias, BiasVerdict, OlsFit, PathModelFit};
pub use report::FairnessReport;
pub use scalar::Scalar;
pub use scores::{load_external_scores, ScoreSet, ScoreVariant};
pub use synth::{calibration_trial, generate, CalibrationResult, SynthSpec};

pub type Dataset = FairnessDataset<f64>;
pub type Scores = ScoreSet<f64>;
pub type Logistic = LogisticModel<f64>;
pub type PathFit = PathModelFit<f64>;
pub type Policy = MitigationPolicy<f64>;
pub type Verdict = BiasVerdict<f64>;
pub type Matrix = linalg::Matrix<f64>;

pub type Dataset32 = FairnessDataset<f32>;
pub type Scores32 = ScoreSet<f32>;
pub type Logistic32 = LogisticModel<f32>;
pub type PathFit32 = PathModelFit<f32>;
pub type Matrix32 = linalg::Matrix<f32>;
