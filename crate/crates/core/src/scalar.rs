//! Scalar abstraction for the numeric kernels.
//!
//! Metric computation, box geometry, and language-model scoring are written
//! against [`Scalar`] so they work with `f32` or `f64` alike. The crate root
//! exports concrete `f64` aliases, which is what the CLI and the report
//! formats use.

use std::fmt;

/// Floating-point scalar the evaluation math is generic over.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    /// Shorthand for small literal constants (thresholds, percentages).
    fn constant(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable as scalar")
    }
}

impl<T> Scalar for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

/// Unweighted mean of an iterator of scalars; `None` when empty.
pub fn mean<F: Scalar>(values: impl IntoIterator<Item = F>) -> Option<F> {
    let mut sum = F::zero();
    let mut n = 0usize;
    for v in values {
        sum = sum + v;
        n += 1;
    }
    if n == 0 {
        None
    } else {
        Some(sum / F::from_count(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(mean::<f64>(std::iter::empty()), None);
    }

    #[test]
    fn mean_matches_hand_value() {
        assert_eq!(mean::<f64>([1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(mean::<f32>([0.5, 1.5]), Some(1.0));
    }
}
