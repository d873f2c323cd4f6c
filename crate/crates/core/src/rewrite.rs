//! Structural rewrite types of a (source, prediction) pair.
//!
//! Token lists are compared as multisets: word order is ignored, repeated
//! tokens count separately. With `kept = S ∩ P`, `dropped = S \ P` and
//! `added = P \ S`, exactly one type applies to every pair with a non-empty
//! source.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RewriteType {
    /// No prediction.
    Empty,
    /// Same tokens.
    Same,
    /// Tokens only added.
    SuperSet,
    /// Tokens only removed.
    SubSet,
    /// Substitution at equal length.
    Replace,
    /// Substitution that shortens the query.
    SubSetRep,
    /// Substitution that lengthens the query.
    SupSetRep,
    /// Nothing kept.
    Other,
}

impl RewriteType {
    /// Column order of the rewrite-type tables.
    pub const ALL: [RewriteType; 8] = [
        RewriteType::Empty,
        RewriteType::Same,
        RewriteType::SuperSet,
        RewriteType::SubSet,
        RewriteType::Replace,
        RewriteType::SubSetRep,
        RewriteType::SupSetRep,
        RewriteType::Other,
    ];

    /// Types broken out in the per-type recall/precision columns.
    pub const BREAKDOWN: [RewriteType; 5] = [
        RewriteType::SubSet,
        RewriteType::Replace,
        RewriteType::SuperSet,
        RewriteType::SubSetRep,
        RewriteType::SupSetRep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewriteType::Empty => "Empty",
            RewriteType::Same => "Same",
            RewriteType::SuperSet => "SuperSet",
            RewriteType::SubSet => "SubSet",
            RewriteType::Replace => "Replace",
            RewriteType::SubSetRep => "SubSetRep",
            RewriteType::SupSetRep => "SupSetRep",
            RewriteType::Other => "Other",
        }
    }

    /// Short label used in the breakdown columns.
    pub fn abbrev(self) -> &'static str {
        match self {
            RewriteType::Empty => "Em",
            RewriteType::Same => "Sm",
            RewriteType::SuperSet => "Sp",
            RewriteType::SubSet => "Sb",
            RewriteType::Replace => "Rp",
            RewriteType::SubSetRep => "SbRp",
            RewriteType::SupSetRep => "SpRp",
            RewriteType::Other => "Ot",
        }
    }
}

impl fmt::Display for RewriteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewriteType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown rewrite type {s:?}"))
    }
}

/// Sizes of the multiset differences between a source and a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenDiff {
    pub kept: usize,
    pub dropped: usize,
    pub added: usize,
}

impl TokenDiff {
    pub fn new<S: AsRef<str>>(source: &[S], prediction: &[S]) -> Self {
        let mut balance: BTreeMap<&str, isize> = BTreeMap::new();
        for t in source {
            *balance.entry(t.as_ref()).or_default() += 1;
        }
        for t in prediction {
            *balance.entry(t.as_ref()).or_default() -= 1;
        }
        let dropped: usize = balance
            .values()
            .filter(|&&v| v > 0)
            .map(|&v| v as usize)
            .sum();
        let added: usize = balance
            .values()
            .filter(|&&v| v < 0)
            .map(|&v| (-v) as usize)
            .sum();
        Self {
            kept: source.len() - dropped,
            dropped,
            added,
        }
    }
}

/// Rewrite type of `prediction` relative to `source`.
pub fn classify<S: AsRef<str>>(source: &[S], prediction: &[S]) -> Result<RewriteType> {
    if source.is_empty() {
        return Err(Error::Input(
            "cannot classify a rewrite of an empty source".into(),
        ));
    }
    if prediction.is_empty() {
        return Ok(RewriteType::Empty);
    }
    let d = TokenDiff::new(source, prediction);
    Ok(match (d.dropped > 0, d.added > 0) {
        (false, false) => RewriteType::Same,
        (false, true) => RewriteType::SuperSet,
        (true, false) => RewriteType::SubSet,
        (true, true) if d.kept == 0 => RewriteType::Other,
        (true, true) => match prediction.len().cmp(&source.len()) {
            std::cmp::Ordering::Equal => RewriteType::Replace,
            std::cmp::Ordering::Less => RewriteType::SubSetRep,
            std::cmp::Ordering::Greater => RewriteType::SupSetRep,
        },
    })
}

/// Frequency of each rewrite type over a set of pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeHistogram<F> {
    pub total: usize,
    /// Every type is present, zero counts included.
    pub counts: BTreeMap<RewriteType, usize>,
    /// `100 * count / total` per type.
    pub percent: BTreeMap<RewriteType, F>,
}

impl<F: Scalar> TypeHistogram<F> {
    pub fn from_types(types: impl IntoIterator<Item = RewriteType>) -> Result<Self> {
        let mut counts: BTreeMap<RewriteType, usize> =
            RewriteType::ALL.iter().map(|&t| (t, 0)).collect();
        let mut total = 0;
        for t in types {
            *counts.get_mut(&t).unwrap() += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::Input("rewrite-type histogram of no pairs".into()));
        }
        let percent = counts
            .iter()
            .map(|(&t, &c)| (t, F::hundred() * F::ratio(c, total)))
            .collect();
        Ok(Self {
            total,
            counts,
            percent,
        })
    }

    pub fn percentage(&self, t: RewriteType) -> F {
        self.percent[&t]
    }

    /// Types with a non-zero count.
    pub fn support(&self) -> Vec<RewriteType> {
        self.counts
            .iter()
            .filter(|(_, &c)| c > 0)
            .map(|(&t, _)| t)
            .collect()
    }
}

/// Histogram of `classify(source, prediction)` over `pairs`.
pub fn type_histogram<F: Scalar, S: AsRef<str>>(
    pairs: &[(Vec<S>, Vec<S>)],
) -> Result<TypeHistogram<F>> {
    let types = pairs
        .iter()
        .map(|(s, p)| classify(s, p))
        .collect::<Result<Vec<_>>>()?;
    TypeHistogram::from_types(types)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    fn c(s: &str, p: &str) -> RewriteType {
        classify(&toks(s), &toks(p)).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(
            c("nike air jordan 4", "nike air jordan 11"),
            RewriteType::Replace
        );
        assert_eq!(
            c("nike womens size 9", "nike womens air max size 9"),
            RewriteType::SuperSet
        );
        assert_eq!(c("a b", ""), RewriteType::Empty);
        assert_eq!(c("a b", "c d"), RewriteType::Other);
    }

    #[test]
    fn every_type() {
        assert_eq!(c("a b", "b a"), RewriteType::Same);
        assert_eq!(
            c("nike 9 womens size", "nike womens size 9"),
            RewriteType::Same
        );
        assert_eq!(c("a b", "a b c"), RewriteType::SuperSet);
        assert_eq!(c("a b c", "a c"), RewriteType::SubSet);
        assert_eq!(c("a b c", "a x"), RewriteType::SubSetRep);
        assert_eq!(c("a b", "a x y"), RewriteType::SupSetRep);
        assert_eq!(c("a b", "c"), RewriteType::Other);
        // multiset: a repeated token is an addition
        assert_eq!(c("a b", "a a b"), RewriteType::SuperSet);
        assert_eq!(c("a a", "a b"), RewriteType::Replace);
    }

    #[test]
    fn empty_source_is_an_error() {
        assert!(matches!(
            classify::<&str>(&[], &["a"]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn histograms() {
        let pairs = vec![
            (toks("a b"), toks("a b")),
            (toks("a b"), toks("b a")),
            (toks("a b c"), toks("a")),
            (toks("a b c d"), toks("a d")),
        ];
        let h: TypeHistogram<f64> = type_histogram(&pairs).unwrap();
        assert_eq!(h.percentage(RewriteType::Same), 50.0);
        assert_eq!(h.percentage(RewriteType::SubSet), 50.0);
        assert_eq!(h.support(), [RewriteType::Same, RewriteType::SubSet]);

        let empties = vec![(toks("a"), vec![]), (toks("b c"), vec![])];
        let h: TypeHistogram<f32> = type_histogram(&empties).unwrap();
        assert_eq!(h.percentage(RewriteType::Empty), 100.0);

        assert!(type_histogram::<f64, &str>(&[]).is_err());
    }

    #[test]
    fn type_names_round_trip() {
        for t in RewriteType::ALL {
            assert_eq!(t.name().parse::<RewriteType>().unwrap(), t);
        }
    }

    fn word() -> impl Strategy<Value = String> {
        prop_oneof![Just("a"), Just("b"), Just("c"), Just("d"), Just("e")].prop_map(String::from)
    }

    proptest! {
        #[test]
        fn same_on_identity(s in proptest::collection::vec(word(), 1..8)) {
            prop_assert_eq!(classify(&s, &s).unwrap(), RewriteType::Same);
        }

        #[test]
        fn swap_duality(
            s in proptest::collection::vec(word(), 1..7),
            p in proptest::collection::vec(word(), 1..7),
        ) {
            let fwd = classify(&s, &p).unwrap();
            let back = classify(&p, &s).unwrap();
            let expect = match fwd {
                RewriteType::SuperSet => RewriteType::SubSet,
                RewriteType::SubSet => RewriteType::SuperSet,
                RewriteType::SubSetRep => RewriteType::SupSetRep,
                RewriteType::SupSetRep => RewriteType::SubSetRep,
                other => other,
            };
            prop_assert_eq!(back, expect);
        }

        #[test]
        fn histogram_sums_to_hundred(
            pairs in proptest::collection::vec(
                (proptest::collection::vec(word(), 1..5), proptest::collection::vec(word(), 0..5)),
                1..40,
            )
        ) {
            let h: TypeHistogram<f64> = type_histogram(&pairs).unwrap();
            let sum: f64 = h.percent.values().sum();
            prop_assert!((sum - 100.0).abs() <= 0.01);
            prop_assert_eq!(h.counts.values().sum::<usize>(), pairs.len());
        }
    }
}
