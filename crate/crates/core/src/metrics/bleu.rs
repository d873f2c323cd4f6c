use std::collections::HashMap;

use crate::{Error, Result, Scalar};

pub const MAX_ORDER: usize = 4;

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(AsRef::as_ref).collect())
                .or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and prediction n-gram totals for orders 1..=4.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub pred_len: usize,
    pub gold_len: usize,
}

impl BleuStats {
    pub fn add<S: AsRef<str>>(&mut self, gold: &[S], pred: &[S]) {
        self.pred_len += pred.len();
        self.gold_len += gold.len();
        for n in 1..=MAX_ORDER {
            let g = ngram_counts(gold, n);
            let p = ngram_counts(pred, n);
            self.totals[n - 1] += p.values().sum::<usize>();
            self.matches[n - 1] += p
                .iter()
                .map(|(k, &c)| c.min(g.get(k).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }

    /// Corpus BLEU in `[0, 100]`.
    ///
    /// Unigram precision is used as is; an order >= 2 with no match is
    /// smoothed to `1 / (total + 1)`. Brevity penalty `exp(1 - r/c)` applies
    /// when the predictions are shorter than the references.
    pub fn score<F: Scalar>(&self) -> F {
        if self.pred_len == 0 || self.matches[0] == 0 {
            return F::zero();
        }
        let mut log_sum = F::zero();
        for n in 0..MAX_ORDER {
            let p = if n > 0 && self.matches[n] == 0 {
                F::ratio(1, self.totals[n] + 1)
            } else {
                F::ratio(self.matches[n], self.totals[n])
            };
            log_sum = log_sum + p.ln();
        }
        let bp = if self.pred_len > self.gold_len {
            F::one()
        } else {
            (F::one() - F::ratio(self.gold_len, self.pred_len)).exp()
        };
        F::hundred() * bp * (log_sum / F::from_count(MAX_ORDER)).exp()
    }
}

/// Corpus-level BLEU over `(gold, prediction)` pairs.
pub fn bleu<F: Scalar, S: AsRef<str>>(corpus: &[(Vec<S>, Vec<S>)]) -> Result<F> {
    if corpus.is_empty() {
        return Err(Error::Input("BLEU of an empty corpus".into()));
    }
    let mut stats = BleuStats::default();
    for (g, p) in corpus {
        stats.add(g, p);
    }
    Ok(stats.score())
}
