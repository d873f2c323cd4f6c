use crate::{Error, Result, Scalar};

use crate::scalar::ordered_mean;

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// LCS F-measure (beta = 1) of one prediction against its gold sequence.
pub fn rouge_l_instance<F: Scalar, S: AsRef<str>>(gold: &[S], pred: &[S]) -> F {
    let lcs = lcs_len(gold, pred);
    if lcs == 0 {
        return F::zero();
    }
    // F1 of P = lcs/|pred| and R = lcs/|gold| simplifies to this
    F::ratio(2 * lcs, gold.len() + pred.len())
}

/// Mean per-instance ROUGE-L over `(gold, prediction)` pairs.
pub fn rouge_l<F: Scalar, S: AsRef<str>>(corpus: &[(Vec<S>, Vec<S>)]) -> Result<F> {
    if corpus.is_empty() {
        return Err(Error::Input("ROUGE-L of an empty corpus".into()));
    }
    Ok(ordered_mean(
        corpus.iter().map(|(g, p)| rouge_l_instance::<F, _>(g, p)),
    ))
}
