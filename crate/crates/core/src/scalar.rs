//! Scalar abstraction for the numeric kernels.
//!
//! Everything numeric in this crate is generic over [`Scalar`], so the same
//! kernels run in `f32` or `f64`. The crate-root aliases pin `f64`, which is
//! what the CLI and the persistence formats use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used by all numeric kernels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum<Self> + Debug + Display + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + NumAssign + Sum<Self> + Debug + Display + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
///
/// Panics only if the scalar type cannot represent ordinary constants, which
/// cannot happen for the float types this crate is instantiated with.
#[inline]
pub fn lit<T: Scalar>(value: f64) -> T {
    T::from_f64(value).expect("constant representable in scalar type")
}

/// Converts the working scalar into `f64` for distribution lookups and output.
#[inline]
pub fn to_f64<T: Scalar>(value: T) -> f64 {
    value.to_f64().expect("scalar convertible to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_of_squares<T: Scalar>(values: &[T]) -> T {
        values.iter().map(|v| *v * *v).sum()
    }

    #[test]
    fn kernels_accept_both_float_widths() {
        assert_eq!(sum_of_squares(&[1.0f64, 2.0]), 5.0);
        assert_eq!(sum_of_squares(&[1.0f32, 2.0]), 5.0);
        assert_eq!(lit::<f32>(0.5), 0.5f32);
        assert_eq!(to_f64(0.25f32), 0.25);
    }
}
