//! Evaluation of predicted rewrites against gold rewrites.
//!
//! Every function is generic over the [`Scalar`] used for rates. Sums over
//! instances go through [`ordered_sum`](crate::scalar::ordered_sum), so a
//! report does not depend on instance order down to the last bit.

mod bleu;
mod predictions;
mod rouge;
mod table;

use std::collections::BTreeMap;

use serde::Serialize;

pub use bleu::{bleu, BleuStats, MAX_ORDER};
pub use predictions::{read_predictions, write_predictions, PredictionRow};
pub use rouge::{lcs_len, rouge_l, rouge_l_instance};
pub use table::{render_tables, NamedReport};

use crate::intents::IntentBucket;
use crate::rewrite::{classify, RewriteType, TypeHistogram};
use crate::scalar::{ordered_mean, ordered_sum};
use crate::{Error, Result, Scalar};

/// One test instance with its ranked candidate rewrites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInstance {
    pub source: Vec<String>,
    pub gold: Vec<String>,
    /// `classify(source, gold)`.
    pub gold_type: RewriteType,
    pub intent: Option<IntentBucket>,
    /// At least one; a candidate may be empty.
    pub candidates: Vec<Vec<String>>,
}

impl EvalInstance {
    pub fn new(
        source: Vec<String>,
        gold: Vec<String>,
        candidates: Vec<Vec<String>>,
        intent: Option<IntentBucket>,
    ) -> Result<Self> {
        if gold.is_empty() {
            return Err(Error::Input("gold rewrite is empty".into()));
        }
        if candidates.is_empty() {
            return Err(Error::Input("instance has no candidate".into()));
        }
        let gold_type = classify(&source, &gold)?;
        Ok(Self {
            source,
            gold,
            gold_type,
            intent,
            candidates,
        })
    }

    /// Convenience constructor from space-separated strings.
    pub fn from_strs(source: &str, gold: &str, candidates: &[&str]) -> Result<Self> {
        let split = |s: &str| s.split_whitespace().map(str::to_owned).collect();
        Self::new(
            split(source),
            split(gold),
            candidates.iter().map(|c| split(c)).collect(),
            None,
        )
    }
}

/// Size of the multiset intersection.
fn overlap<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in a {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut hit = 0;
    for t in b {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                hit += 1;
            }
        }
    }
    hit
}

/// Share of gold tokens (as a multiset) present in the prediction.
pub fn token_recall<F: Scalar, S: AsRef<str>>(gold: &[S], pred: &[S]) -> Result<F> {
    if gold.is_empty() {
        return Err(Error::Input(
            "token recall against an empty gold rewrite".into(),
        ));
    }
    Ok(F::ratio(overlap(gold, pred), gold.len()))
}

/// Share of predicted tokens present in the gold rewrite; 0 for an empty
/// prediction.
pub fn token_precision<F: Scalar, S: AsRef<str>>(gold: &[S], pred: &[S]) -> Result<F> {
    if gold.is_empty() {
        return Err(Error::Input(
            "token precision against an empty gold rewrite".into(),
        ));
    }
    if pred.is_empty() {
        return Ok(F::zero());
    }
    Ok(F::ratio(overlap(gold, pred), pred.len()))
}

fn is_rewrite(t: RewriteType) -> bool {
    !matches!(t, RewriteType::Empty | RewriteType::Same)
}

fn non_empty<T>(instances: &[T]) -> Result<()> {
    if instances.is_empty() {
        Err(Error::Input("no evaluation instances".into()))
    } else {
        Ok(())
    }
}

/// Share of instances whose first candidate is a real rewrite (neither
/// empty nor the same tokens as the source).
pub fn coverage<F: Scalar>(instances: &[EvalInstance]) -> Result<F> {
    non_empty(instances)?;
    let hits = instances
        .iter()
        .map(|i| classify(&i.source, &i.candidates[0]).map(is_rewrite))
        .collect::<Result<Vec<_>>>()?;
    Ok(F::ratio(
        hits.into_iter().filter(|&h| h).count(),
        instances.len(),
    ))
}

/// Rewrite type agreement: share of instances whose first candidate has the
/// gold rewrite's type.
pub fn rats<F: Scalar>(instances: &[EvalInstance]) -> Result<F> {
    non_empty(instances)?;
    let mut agree = 0;
    for i in instances {
        if classify(&i.source, &i.candidates[0])? == i.gold_type {
            agree += 1;
        }
    }
    Ok(F::ratio(agree, instances.len()))
}

/// Mean token recall and precision of one gold rewrite type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeScores<F> {
    pub count: usize,
    pub rec: F,
    pub pre: F,
}

fn breakdown<F: Scalar>(scored: &[(RewriteType, F, F)]) -> BTreeMap<RewriteType, TypeScores<F>> {
    let mut groups: BTreeMap<RewriteType, (Vec<F>, Vec<F>)> = BTreeMap::new();
    for &(t, r, p) in scored {
        let g = groups.entry(t).or_default();
        g.0.push(r);
        g.1.push(p);
    }
    groups
        .into_iter()
        .map(|(t, (r, p))| {
            (
                t,
                TypeScores {
                    count: r.len(),
                    rec: ordered_mean(r),
                    pre: ordered_mean(p),
                },
            )
        })
        .collect()
}

/// Frequency-weighted sum of per-type scores.
fn frequency_weighted<F: Scalar>(
    per_type: &BTreeMap<RewriteType, TypeScores<F>>,
    n: usize,
) -> (F, F) {
    let mut rec = F::zero();
    let mut pre = F::zero();
    for s in per_type.values() {
        let f = F::ratio(s.count, n);
        rec = rec + f * s.rec;
        pre = pre + f * s.pre;
    }
    (rec, pre)
}

/// Mean recall/precision of the first candidate, grouped by gold rewrite
/// type. Only gold types that occur are present.
pub fn per_type_breakdown<F: Scalar>(
    instances: &[EvalInstance],
) -> Result<BTreeMap<RewriteType, TypeScores<F>>> {
    non_empty(instances)?;
    let scored = instances
        .iter()
        .map(|i| {
            Ok((
                i.gold_type,
                token_recall(&i.gold, &i.candidates[0])?,
                token_precision(&i.gold, &i.candidates[0])?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(breakdown(&scored))
}

/// Recall and precision per gold type, weighted by how often each type
/// occurs in the test set.
pub fn rtfw<F: Scalar>(instances: &[EvalInstance]) -> Result<(F, F)> {
    let per_type = per_type_breakdown(instances)?;
    Ok(frequency_weighted(&per_type, instances.len()))
}

/// Every metric for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport<F> {
    pub n: usize,
    /// Number of candidates considered per instance.
    pub k: usize,
    pub cov: F,
    pub rec: F,
    pub pre: F,
    /// Keyed by observed gold rewrite type.
    pub per_type: BTreeMap<RewriteType, TypeScores<F>>,
    /// In `[0, 100]`.
    pub bleu: F,
    #[serde(rename = "rougeL")]
    pub rouge_l: F,
    pub rats: F,
    pub rtfw_rec: F,
    pub rtfw_pre: F,
    /// Rewrite types of the scored predictions.
    pub prediction_types: TypeHistogram<F>,
    /// Rewrite types of the gold rewrites.
    pub gold_types: TypeHistogram<F>,
}

/// What gets scored for one instance.
struct Selection<'a> {
    pred: &'a [String],
    type_hit: bool,
    covered: bool,
}

fn build_report<F: Scalar>(
    instances: &[EvalInstance],
    picks: &[Selection<'_>],
    k: usize,
) -> Result<EvalReport<F>> {
    let n = instances.len();
    let mut scored = Vec::with_capacity(n);
    let mut pred_types = Vec::with_capacity(n);
    let mut bleu_stats = BleuStats::default();
    let mut rouge = Vec::with_capacity(n);
    for (inst, pick) in instances.iter().zip(picks) {
        scored.push((
            inst.gold_type,
            token_recall::<F, _>(&inst.gold, pick.pred)?,
            token_precision::<F, _>(&inst.gold, pick.pred)?,
        ));
        pred_types.push(classify(&inst.source, pick.pred)?);
        bleu_stats.add(&inst.gold, pick.pred);
        rouge.push(rouge_l_instance::<F, _>(&inst.gold, pick.pred));
    }
    let per_type = breakdown(&scored);
    let (rtfw_rec, rtfw_pre) = frequency_weighted(&per_type, n);
    Ok(EvalReport {
        n,
        k,
        cov: F::ratio(picks.iter().filter(|p| p.covered).count(), n),
        rec: ordered_mean(scored.iter().map(|s| s.1)),
        pre: ordered_mean(scored.iter().map(|s| s.2)),
        per_type,
        bleu: bleu_stats.score(),
        rouge_l: ordered_sum(rouge) / F::from_count(n),
        rats: F::ratio(picks.iter().filter(|p| p.type_hit).count(), n),
        rtfw_rec,
        rtfw_pre,
        prediction_types: TypeHistogram::from_types(pred_types)?,
        gold_types: TypeHistogram::from_types(instances.iter().map(|i| i.gold_type))?,
    })
}

/// Scores the first candidate of every instance.
pub fn evaluate<F: Scalar>(instances: &[EvalInstance]) -> Result<EvalReport<F>> {
    non_empty(instances)?;
    let picks = instances
        .iter()
        .map(|i| {
            let pred = &i.candidates[0];
            let t = classify(&i.source, pred)?;
            Ok(Selection {
                pred,
                type_hit: t == i.gold_type,
                covered: is_rewrite(t),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_report(instances, &picks, 1)
}

/// Token F1 of a candidate as the exact fraction `2 * overlap / (|gold| + |pred|)`.
fn f1_fraction(gold: &[String], pred: &[String]) -> (usize, usize) {
    (2 * overlap(gold, pred), gold.len() + pred.len())
}

/// Scores the best of the first `k` candidates of every instance.
///
/// Token metrics, BLEU and ROUGE-L use the candidate with the highest token
/// F1 against gold (earliest on ties); type agreement and coverage count an
/// instance when any of its `k` candidates qualifies. Instances with fewer
/// than `k` candidates use all they have.
pub fn evaluate_at_k<F: Scalar>(instances: &[EvalInstance], k: usize) -> Result<EvalReport<F>> {
    if k == 0 {
        return Err(Error::Input("k must be at least 1".into()));
    }
    non_empty(instances)?;
    let picks = instances
        .iter()
        .map(|i| {
            let window = &i.candidates[..k.min(i.candidates.len())];
            let mut best = &window[0];
            let mut best_f1 = f1_fraction(&i.gold, best);
            for c in &window[1..] {
                let f1 = f1_fraction(&i.gold, c);
                // a/b > c/d with non-negative integers
                if f1.0 * best_f1.1 > best_f1.0 * f1.1 {
                    best = c;
                    best_f1 = f1;
                }
            }
            let types = window
                .iter()
                .map(|c| classify(&i.source, c))
                .collect::<Result<Vec<_>>>()?;
            Ok(Selection {
                pred: best,
                type_hit: types.contains(&i.gold_type),
                covered: types.iter().any(|&t| is_rewrite(t)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    build_report(instances, &picks, k)
}

impl<F: Scalar> EvalReport<F> {
    /// Per-type scores in breakdown-column order, `None` when absent.
    pub fn breakdown_columns(&self) -> [Option<TypeScores<F>>; 5] {
        RewriteType::BREAKDOWN.map(|t| self.per_type.get(&t).copied())
    }
}
