//! Query reformulation mining and evaluation.
//!
//! The crate covers the whole offline loop: behavioral logs are mined into
//! source/target query pairs ([`miner`]), the pairs are filtered into
//! Same / Similar / Inspired intent buckets ([`intents`]), exported as
//! intent-tagged training data, and model predictions are scored with the
//! rewrite-type taxonomy ([`rewrite`]) and metric suite ([`metrics`]).
//!
//! Metric code is generic over the [`Scalar`] float type. The aliases at the
//! crate root fix it to `f64`, which is what the pipeline and CLI use.

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod intents;
pub mod metrics;
pub mod miner;
pub mod pipeline;
pub mod rewrite;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub use corpus::{
    engagement_score, generate_synthetic_log, normalize, GeneratorSpec, NormalizeConfig,
    SessionEvent, SessionLog, SignalKind, SignalWeights, Taxonomy,
};
pub use intents::{assign_bucket, IntentBucket, IntentContext, IntentThresholds};
pub use miner::{CoClickGraph, Provenance, QueryPair};
pub use rewrite::{classify, RewriteType};

/// Evaluation report with `f64` rates.
pub type EvalReport = metrics::EvalReport<f64>;
/// Per-type recall/precision with `f64` rates.
pub type TypeScores = metrics::TypeScores<f64>;
/// Rewrite-type histogram with `f64` percentages.
pub type TypeHistogram = rewrite::TypeHistogram<f64>;
/// Intent thresholds with `f64` similarity cut-offs.
pub type Thresholds = intents::IntentThresholds<f64>;
