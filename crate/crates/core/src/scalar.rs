use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// Numeric type the metric formulas are written against.
///
/// Implemented for `f32`, `f64` and `Ratio<i64>`; the rational instance gives
/// exact answers for the hand-computed examples.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lift a count into the scalar type.
    fn from_count(n: usize) -> Self;

    fn to_f64(self) -> f64;

    /// `num / den`, or zero when `den` is zero.
    fn ratio(num: usize, den: usize) -> Self {
        if den == 0 {
            Self::zero()
        } else {
            Self::from_count(num) / Self::from_count(den)
        }
    }

    /// Harmonic mean of precision and recall; zero when both are zero.
    fn f1(p: Self, r: Self) -> Self {
        let sum = p + r;
        if sum == Self::zero() {
            Self::zero()
        } else {
            (Self::one() + Self::one()) * p * r / sum
        }
    }

    fn mean<I: IntoIterator<Item = Self>>(values: I) -> Self {
        let mut total = Self::zero();
        let mut n = 0usize;
        for v in values {
            total = total + v;
            n += 1;
        }
        if n == 0 {
            Self::zero()
        } else {
            total / Self::from_count(n)
        }
    }
}

impl Scalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count fits in i64"))
    }
    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_guards_zero_denominator() {
        assert_eq!(f64::ratio(3, 0), 0.0);
        assert_eq!(Ratio::<i64>::ratio(1, 2), Ratio::new(1, 2));
    }

    #[test]
    fn f1_is_exact_in_rationals() {
        let f = Ratio::<i64>::f1(Ratio::new(1, 2), Ratio::from_integer(1));
        assert_eq!(f, Ratio::new(2, 3));
        assert_eq!(f64::f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn mean_of_nothing_is_zero() {
        assert_eq!(f32::mean(std::iter::empty()), 0.0);
        assert_eq!(f64::mean([1.0, 2.0]), 1.5);
    }
}
