use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the metric and similarity code is written against.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// `num / den` computed in this scalar type. `den` must be non-zero.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_usize(num).unwrap() / Self::from_usize(den).unwrap()
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap()
    }

    fn hundred() -> Self {
        Self::from_u8(100).unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sum that does not depend on the order of `values`.
///
/// Values are sorted before accumulation so that reports are bit-identical
/// under any permutation of the instances they were computed from.
pub fn ordered_sum<F: Scalar>(values: impl IntoIterator<Item = F>) -> F {
    let mut v: Vec<F> = values.into_iter().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.into_iter().fold(F::zero(), |acc, x| acc + x)
}

/// Mean with the same order independence as [`ordered_sum`]; zero for no values.
pub fn ordered_mean<F: Scalar>(values: impl IntoIterator<Item = F>) -> F {
    let v: Vec<F> = values.into_iter().collect();
    if v.is_empty() {
        return F::zero();
    }
    let n = v.len();
    ordered_sum(v) / F::from_count(n)
}
