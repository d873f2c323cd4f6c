use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{recall_similarity, tag_aspects, AspectLexicon, RetrievalIndex};
use crate::corpus::{SessionLog, Taxonomy};
use crate::miner::{Provenance, QueryPair};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntentBucket {
    SameIntent,
    SimilarIntent,
    InspiredIntent,
}

impl IntentBucket {
    pub const ALL: [IntentBucket; 3] = [
        IntentBucket::SameIntent,
        IntentBucket::SimilarIntent,
        IntentBucket::InspiredIntent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntentBucket::SameIntent => "same",
            IntentBucket::SimilarIntent => "similar",
            IntentBucket::InspiredIntent => "inspired",
        }
    }

    /// Conditioning token prepended to training instances.
    pub fn tag(self) -> &'static str {
        match self {
            IntentBucket::SameIntent => "<same>",
            IntentBucket::SimilarIntent => "<similar>",
            IntentBucket::InspiredIntent => "<inspired>",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.tag() == tag)
    }
}

impl fmt::Display for IntentBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntentBucket {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown intent bucket {s:?}"))
    }
}

/// The constraint a rejected pair failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    /// No shared token and no shared recalled item, outside one-hop mining.
    RecallGuard,
    /// Categories too far apart: not the same leaf (same-intent rule) and
    /// not the same meta category (similar-intent rule).
    CategoryAlignment,
    /// Same leaf and similar tokens, but query lengths differ too much.
    LengthCompatibility,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::RecallGuard => "recall_guard",
            RejectReason::CategoryAlignment => "category_alignment",
            RejectReason::LengthCompatibility => "length_compatibility",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Bucket(IntentBucket),
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntentThresholds<F> {
    /// Minimum token Jaccard for Same intent.
    pub tau_same: F,
    /// Token Jaccard below this is "low similarity".
    pub tau_sim: F,
    /// Minimum residual-token Jaccard for an aspect-only change.
    pub tau_core: F,
    /// Largest token-count difference allowed for Same intent.
    pub delta_len: usize,
    /// Recall set size used by the recall guard.
    pub recall_k: usize,
}

impl<F: Scalar> Default for IntentThresholds<F> {
    fn default() -> Self {
        let f = |x: f64| F::from_f64(x).unwrap();
        Self {
            tau_same: f(0.6),
            tau_sim: f(0.2),
            tau_core: f(0.5),
            delta_len: 1,
            recall_k: 50,
        }
    }
}

impl<F: Scalar> IntentThresholds<F> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: F| x >= F::zero() && x <= F::one();
        if !unit(self.tau_same) || !unit(self.tau_sim) || !unit(self.tau_core) {
            return Err(Error::Config("intent thresholds must lie in [0, 1]".into()));
        }
        if self.tau_sim > self.tau_same {
            return Err(Error::Config("tau_sim must not exceed tau_same".into()));
        }
        if self.recall_k == 0 {
            return Err(Error::Config("recall_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Query to leaf-category assignment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryCategories(BTreeMap<String, String>);

impl QueryCategories {
    /// Files each normalized query under the category it was most often
    /// logged with (ties go to the smaller category id).
    pub fn from_log(log: &SessionLog) -> Self {
        let mut counts: BTreeMap<String, BTreeMap<&str, usize>> = BTreeMap::new();
        for ev in log.events() {
            *counts
                .entry(ev.query())
                .or_default()
                .entry(&ev.category)
                .or_default() += 1;
        }
        Self(
            counts
                .into_iter()
                .map(|(q, by_cat)| {
                    let best = by_cat
                        .iter()
                        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                        .map(|(c, _)| c.to_string())
                        .unwrap();
                    (q, best)
                })
                .collect(),
        )
    }

    pub fn insert(&mut self, query: impl Into<String>, category: impl Into<String>) {
        self.0.insert(query.into(), category.into());
    }

    pub fn get(&self, query: &str) -> Option<&str> {
        self.0.get(query).map(String::as_str)
    }
}

impl<Q: Into<String>, C: Into<String>> FromIterator<(Q, C)> for QueryCategories {
    fn from_iter<T: IntoIterator<Item = (Q, C)>>(iter: T) -> Self {
        Self(
            iter.into_iter()
                .map(|(q, c)| (q.into(), c.into()))
                .collect(),
        )
    }
}

/// Everything intent bucketing looks at besides the pair itself.
#[derive(Debug, Clone)]
pub struct IntentContext<F> {
    pub taxonomy: Taxonomy,
    pub lexicon: AspectLexicon,
    pub index: RetrievalIndex,
    pub categories: QueryCategories,
    pub thresholds: IntentThresholds<F>,
}

/// Set Jaccard of two token lists; 0 when both are empty.
pub fn token_jaccard<F: Scalar, S: AsRef<str>>(a: &[S], b: &[S]) -> F {
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        F::zero()
    } else {
        F::ratio(a.intersection(&b).count(), union)
    }
}

/// Places a mined pair in an intent bucket.
///
/// Rules are tried in order and the first that holds wins:
///
/// 0. guard: outside one-hop mining, a pair sharing no token and no
///    recalled item is rejected;
/// 1. Same: same leaf category, token Jaccard at least `tau_same`, and
///    lengths within `delta_len`;
/// 2. Similar: same leaf or meta category, and either the aspects differ
///    while the residual tokens overlap by at least `tau_core`, or token
///    Jaccard lies in `[tau_sim, tau_same)`;
/// 3. Inspired: one-hop provenance or token Jaccard below `tau_sim`;
///
/// anything else is rejected with the same-intent constraint it broke.
pub fn assign_bucket<F: Scalar>(pair: &QueryPair, ctx: &IntentContext<F>) -> Result<Verdict> {
    let th = &ctx.thresholds;
    let src_cat = category_of(&pair.source_query, ctx)?;
    let tgt_cat = category_of(&pair.target_query, ctx)?;
    let same_leaf = src_cat == tgt_cat;
    let same_meta = ctx.taxonomy.meta_category(src_cat) == ctx.taxonomy.meta_category(tgt_cat);
    let one_hop = pair.provenance() == Provenance::CrossSessionOneHop;
    let jaccard: F = token_jaccard(&pair.source_tokens, &pair.target_tokens);
    let len_diff = pair.source_tokens.len().abs_diff(pair.target_tokens.len());

    if !one_hop && jaccard == F::zero() {
        let recall: F = recall_similarity(
            &pair.source_tokens,
            &pair.target_tokens,
            &ctx.index,
            th.recall_k,
        )?;
        if recall == F::zero() {
            return Ok(Verdict::Rejected(RejectReason::RecallGuard));
        }
    }

    if same_leaf && jaccard >= th.tau_same && len_diff <= th.delta_len {
        return Ok(Verdict::Bucket(IntentBucket::SameIntent));
    }

    if same_leaf || same_meta {
        let in_band = jaccard >= th.tau_sim && jaccard < th.tau_same;
        if in_band || aspect_shift(pair, ctx) {
            return Ok(Verdict::Bucket(IntentBucket::SimilarIntent));
        }
    }

    if one_hop || jaccard < th.tau_sim {
        return Ok(Verdict::Bucket(IntentBucket::InspiredIntent));
    }

    Ok(Verdict::Rejected(if !same_leaf {
        RejectReason::CategoryAlignment
    } else {
        RejectReason::LengthCompatibility
    }))
}

/// Aspects differ but the rest of the query is largely kept.
fn aspect_shift<F: Scalar>(pair: &QueryPair, ctx: &IntentContext<F>) -> bool {
    let src = tag_aspects(&pair.source_tokens, &ctx.lexicon);
    let tgt = tag_aspects(&pair.target_tokens, &ctx.lexicon);
    src.aspects != tgt.aspects
        && token_jaccard::<F, _>(&src.residual, &tgt.residual) >= ctx.thresholds.tau_core
}

fn category_of<'a, F>(query: &str, ctx: &'a IntentContext<F>) -> Result<&'a str> {
    let cat = ctx
        .categories
        .get(query)
        .ok_or_else(|| Error::Validation(format!("no category known for query {query:?}")))?;
    if !ctx.taxonomy.contains(cat) {
        return Err(Error::Validation(format!(
            "query {query:?}: category {cat:?} is not in the taxonomy"
        )));
    }
    Ok(cat)
}

/// Pairs turned away by [`bucketize`], each with its reason.
pub type Rejections = Vec<(QueryPair, RejectReason)>;

/// Buckets every pair, returning the accepted pairs (with `bucket` set) and
/// the rejected ones with their reasons, both in input order.
pub fn bucketize<F: Scalar>(
    pairs: Vec<QueryPair>,
    ctx: &IntentContext<F>,
) -> Result<(Vec<QueryPair>, Rejections)> {
    ctx.thresholds.validate()?;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for mut p in pairs {
        match assign_bucket(&p, ctx)? {
            Verdict::Bucket(b) => {
                p.bucket = Some(b);
                accepted.push(p);
            }
            Verdict::Rejected(r) => rejected.push((p, r)),
        }
    }
    Ok((accepted, rejected))
}
