//! Scalar types the analytic and metric code is generic over.
//!
//! Floats (`f32`, `f64`) are the everyday choice. [`BigRational`] gives exact
//! answers for small instances, which is how the closed-form test values are
//! pinned without rounding slack.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

/// A number type usable by [`crate::theory`] and [`crate::multiset::Multiset::accuracy`].
pub trait Scalar: Num + Clone + PartialOrd + Debug {
    /// `num / den`, exact where the type allows it. `den` must be non-zero.
    fn from_ratio(num: u128, den: u128) -> Self;

    fn to_f64(&self) -> f64;

    /// `1 - prod(1 - t)` over `terms`, each `t` in `[0, 1]`.
    ///
    /// The default multiplies directly. Float types override this with a
    /// log-space sum so long products do not lose precision.
    fn complement_of_product<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = Self>,
    {
        let mut acc = Self::one();
        for t in terms {
            acc = acc * (Self::one() - t);
        }
        Self::one() - acc
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_ratio(num: u128, den: u128) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn complement_of_product<I>(terms: I) -> Self
            where
                I: IntoIterator<Item = Self>,
            {
                // Accumulate in f64 regardless of the output width.
                let log_sum: f64 = terms.into_iter().map(|t| (-(t as f64)).ln_1p()).sum();
                (-log_sum.exp_m1()) as $t
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    fn from_ratio(num: u128, den: u128) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// `num / den`, with the degenerate `0/0` read as one.
pub(crate) fn ratio_or_one<T: Scalar>(num: u128, den: u128) -> T {
    if den == 0 {
        T::one()
    } else if num == 0 {
        T::zero()
    } else {
        T::from_ratio(num, den)
    }
}
