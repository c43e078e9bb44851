//! Floating-point scalar used for probabilities, estimates and metrics.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the predictors report in. Implemented for `f32` and `f64`.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    fn from_count(n: u128) -> Self {
        Self::from_u128(n).unwrap_or_else(Self::infinity)
    }

    fn ratio(num: u128, den: u128) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(f64::ratio(3, 4), 0.75);
        assert_eq!(f32::ratio(1, 4), 0.25f32);
        assert_eq!(f64::from_count(u64::MAX as u128), u64::MAX as f64);
    }
}
