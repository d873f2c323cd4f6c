//! Reference reformulators that need no trained model.
//!
//! [`theta_r`] is the stochastic token-drop baseline: queries with at least
//! `min_tokens_to_drop_from` tokens lose between one and
//! `floor(max_drop_fraction * n)` tokens, chosen uniformly; shorter queries
//! pass through unchanged. Each instance draws from its own ChaCha stream
//! keyed by `(seed, index)`, so output does not depend on processing order.

use std::io::BufWriter;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::intents::read_dataset;
use crate::metrics::{write_predictions, PredictionRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RandomDrop,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub seed: u64,
    pub max_drop_fraction: f64,
    pub min_tokens_to_drop_from: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            kind: BaselineKind::RandomDrop,
            seed: 0,
            max_drop_fraction: 0.5,
            min_tokens_to_drop_from: 4,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_drop_fraction > 0.0 && self.max_drop_fraction < 1.0) {
            return Err(Error::Config(format!(
                "max_drop_fraction must lie in (0, 1), got {}",
                self.max_drop_fraction
            )));
        }
        if self.min_tokens_to_drop_from < 2 {
            return Err(Error::Config(format!(
                "min_tokens_to_drop_from must be at least 2, got {}",
                self.min_tokens_to_drop_from
            )));
        }
        Ok(())
    }

    /// Largest drop count for an `n`-token query; 0 means the query is kept.
    pub fn max_drop(&self, n: usize) -> usize {
        if n < self.min_tokens_to_drop_from {
            0
        } else {
            ((self.max_drop_fraction * n as f64).floor() as usize).clamp(1, n - 1)
        }
    }
}

fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Random token drop for the `index`-th instance of a corpus.
pub fn theta_r<S: AsRef<str>>(src: &[S], cfg: &BaselineConfig, index: u64) -> Vec<String> {
    let n = src.len();
    let max_drop = cfg.max_drop(n);
    if max_drop == 0 {
        return identity(src);
    }
    let mut rng = instance_rng(cfg.seed, index);
    let d = rng.gen_range(1..=max_drop);
    let mut drop = vec![false; n];
    for i in sample(&mut rng, n, d) {
        drop[i] = true;
    }
    src.iter()
        .zip(drop)
        .filter(|(_, dropped)| !dropped)
        .map(|(t, _)| t.as_ref().to_owned())
        .collect()
}

pub fn identity<S: AsRef<str>>(src: &[S]) -> Vec<String> {
    src.iter().map(|t| t.as_ref().to_owned()).collect()
}

/// Dispatches on `cfg.kind`.
pub fn predict<S: AsRef<str>>(src: &[S], cfg: &BaselineConfig, index: u64) -> Vec<String> {
    match cfg.kind {
        BaselineKind::RandomDrop => theta_r(src, cfg, index),
        BaselineKind::Identity => identity(src),
    }
}

/// Runs the configured baseline over an exported dataset and writes one
/// prediction line per dataset line, in dataset order.
pub fn run_baseline(dataset: &Path, cfg: &BaselineConfig, out: &Path) -> Result<usize> {
    cfg.validate()?;
    let rows = read_dataset(dataset)?;
    let preds: Vec<PredictionRow> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let src: Vec<&str> = r.source.split_whitespace().collect();
            PredictionRow {
                source: r.source.clone(),
                gold: r.target.clone(),
                bucket: r.bucket,
                candidates: vec![predict(&src, cfg, i as u64).join(" ")],
            }
        })
        .collect();
    let f = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = BufWriter::new(f);
    write_predictions(&preds, &mut w).map_err(|e| Error::io(out, e))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(out, e))?;
    Ok(preds.len())
}
