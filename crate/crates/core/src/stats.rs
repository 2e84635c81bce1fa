//! Summary statistics and test-statistic helpers shared by the regression
//! and complexity layers. Standardization uses the population standard
//! deviation throughout the crate.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

pub fn mean<T: Scalar>(values: &[T]) -> T {
    assert!(!values.is_empty(), "mean of empty slice");
    let sum: T = values.iter().copied().sum();
    sum / lit(values.len() as f64)
}

pub fn population_variance<T: Scalar>(values: &[T]) -> T {
    let m = mean(values);
    let ss: T = values.iter().map(|v| (*v - m) * (*v - m)).sum();
    ss / lit(values.len() as f64)
}

pub fn population_std<T: Scalar>(values: &[T]) -> T {
    population_variance(values).sqrt()
}

/// Z-scores a vector, returning `(scores, mean, std)`.
///
/// Errors when the spread is numerically zero, so degenerate complexity
/// vectors surface as errors instead of NaNs.
pub fn standardize<T: Scalar>(values: &[T]) -> Result<(Vec<T>, T, T)> {
    let m = mean(values);
    let s = population_std(values);
    let floor = T::epsilon() * lit::<T>(100.0) * (T::one() + m.abs());
    if s <= floor {
        return Err(Error::Degenerate(
            "zero-variance vector cannot be standardized".to_string(),
        ));
    }
    let z = values.iter().map(|v| (*v - m) / s).collect();
    Ok((z, m, s))
}

/// Pearson correlation; returns 0 when either side has no spread.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (x, y) in xs.iter().zip(ys) {
        let dx = *x - mx;
        let dy = *y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return T::zero();
    }
    sxy / (sxx * syy).sqrt()
}

/// Threshold above which the normal approximation replaces the exact
/// t-distribution in p-values; the calibration samples here are ~1e5 rows,
/// where the difference is far below reporting precision.
pub const NORMAL_APPROX_MIN_N: usize = 200;

/// Two-sided p-value for a t-statistic with `df` residual degrees of freedom.
pub fn two_sided_p<T: Scalar>(t_stat: T, df: usize, n_obs: usize) -> T {
    let t = to_f64(t_stat).abs();
    if !t.is_finite() {
        return T::zero();
    }
    let p = if n_obs > NORMAL_APPROX_MIN_N {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        2.0 * (1.0 - normal.cdf(t))
    } else {
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
        2.0 * (1.0 - dist.cdf(t))
    };
    lit(p.clamp(0.0, 1.0))
}
