//! Closed-form false positive and collision estimates for counting cuckoo
//! filters.
//!
//! Every function is generic over [`Scalar`]: use `f64` for everyday numbers
//! and [`BigRational`](num_rational::BigRational) for exact values on small
//! inputs. Long products are evaluated in log space for float types.

use thiserror::Error;

use crate::scalar::Scalar;

/// Largest fingerprint width accepted by the analytic functions.
pub const MAX_ANALYTIC_BITS: u32 = 96;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("{distinct} elements exceed the {tuples} distinguishable tuples")]
    TooManyElements { distinct: u64, tuples: u128 },
    #[error("argument out of domain: {0}")]
    Domain(String),
}

fn pow2(bits: u32) -> Result<u128, TheoryError> {
    if bits > MAX_ANALYTIC_BITS {
        return Err(TheoryError::Domain(format!(
            "fingerprint width {bits} above {MAX_ANALYTIC_BITS}"
        )));
    }
    Ok(1u128 << bits)
}

/// `1 - prod_{j=2..N} (1 - (j-1)/tuples)`.
fn birthday_complement<T: Scalar>(tuples: u128, distinct: u64) -> Result<T, TheoryError> {
    if distinct == 0 {
        return Err(TheoryError::Domain("element count must be >= 1".into()));
    }
    if u128::from(distinct - 1) >= tuples {
        return Err(TheoryError::TooManyElements { distinct, tuples });
    }
    Ok(T::complement_of_product(
        (1..u128::from(distinct)).map(|j| T::from_ratio(j, tuples)),
    ))
}

/// Probability that some pair among `distinct` elements shares a
/// (bucket pair, fingerprint) tuple: `1 - prod (1 - (j-1)/(b * 2^(f-1)))`.
pub fn ccf_fpr_product<T: Scalar>(buckets: u64, f: u32, distinct: u64) -> Result<T, TheoryError> {
    if f == 0 || buckets == 0 {
        return Err(TheoryError::Domain("buckets and f must be >= 1".into()));
    }
    birthday_complement(u128::from(buckets) * pow2(f - 1)?, distinct)
}

/// The same product when a slot spends one extra bit marking which
/// candidate bucket is primary: the tuple space doubles to `b * 2^f`.
///
/// Numerically identical to [`ccf_fpr_product`] with `f + 1`, so at equal
/// total bits the marker bit buys nothing over a longer fingerprint.
pub fn ccf_fpr_diffbit<T: Scalar>(buckets: u64, f: u32, distinct: u64) -> Result<T, TheoryError> {
    if buckets == 0 {
        return Err(TheoryError::Domain("buckets must be >= 1".into()));
    }
    birthday_complement(u128::from(buckets) * pow2(f)?, distinct)
}

/// Probability that the last of `distinct` elements collides with an
/// earlier one: `1 - (1 - 2/(b * 2^f))^(N-1)`.
pub fn ccf_fpr_marginal<T: Scalar>(buckets: u64, f: u32, distinct: u64) -> Result<T, TheoryError> {
    if f == 0 || buckets == 0 || distinct == 0 {
        return Err(TheoryError::Domain("arguments must be >= 1".into()));
    }
    let tuples = u128::from(buckets) * pow2(f - 1)?;
    Ok(T::complement_of_product(
        (1..distinct).map(|_| T::from_ratio(1, tuples)),
    ))
}

/// Per-query false positive estimate of a full filter, `w / 2^(f-1)`,
/// capped at 1.
pub fn ccf_fpr_bound<T: Scalar>(slots_per_bucket: u32, f: u32) -> T {
    if f == 0 {
        return T::one();
    }
    let den = match pow2(f - 1) {
        Ok(d) => d,
        Err(_) => return T::zero(),
    };
    let w = u128::from(slots_per_bucket);
    if w >= den {
        T::one()
    } else {
        T::from_ratio(w, den)
    }
}

/// Smallest fingerprint width whose [`ccf_fpr_bound`] is at most `target`;
/// the integer ceiling of `log2 w + log2(1/target) + 1`.
pub fn fingerprint_bits<T: Scalar>(slots_per_bucket: u32, target: T) -> Result<u32, TheoryError> {
    if !(target > T::zero() && target < T::one()) {
        return Err(TheoryError::Domain(format!(
            "target rate {target:?} outside (0, 1)"
        )));
    }
    (1..=MAX_ANALYTIC_BITS)
        .find(|&f| ccf_fpr_bound::<T>(slots_per_bucket, f) <= target)
        .ok_or_else(|| TheoryError::Domain(format!("target rate {target:?} too small")))
}

/// Expected number of collided elements in a full filter holding
/// `N = b * w` elements: `N * w / 2^(f-1)`.
pub fn expected_collisions<T: Scalar>(buckets: u64, slots_per_bucket: u32, f: u32) -> T {
    if f == 0 {
        return T::from_ratio(u128::from(buckets) * u128::from(slots_per_bucket), 1);
    }
    match pow2(f - 1) {
        Ok(den) => {
            let w = u128::from(slots_per_bucket);
            T::from_ratio(u128::from(buckets) * w * w, den)
        }
        Err(_) => T::zero(),
    }
}

/// Bundles a filter geometry with a workload and target rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryQuery<T> {
    pub buckets: u64,
    pub slots_per_bucket: u32,
    pub fingerprint_bits: u32,
    pub distinct: u64,
    pub target_fpr: T,
}

impl<T: Scalar> TheoryQuery<T> {
    pub fn validate(&self) -> Result<(), TheoryError> {
        if self.buckets == 0
            || self.slots_per_bucket == 0
            || self.fingerprint_bits == 0
            || self.distinct == 0
        {
            return Err(TheoryError::Domain("all sizes must be positive".into()));
        }
        if !(self.target_fpr > T::zero() && self.target_fpr < T::one()) {
            return Err(TheoryError::Domain("target rate outside (0, 1)".into()));
        }
        Ok(())
    }

    pub fn product(&self) -> Result<T, TheoryError> {
        ccf_fpr_product(self.buckets, self.fingerprint_bits, self.distinct)
    }

    pub fn bound(&self) -> T {
        ccf_fpr_bound(self.slots_per_bucket, self.fingerprint_bits)
    }

    pub fn required_bits(&self) -> Result<u32, TheoryError> {
        fingerprint_bits(self.slots_per_bucket, self.target_fpr.clone())
    }

    pub fn collisions(&self) -> T {
        expected_collisions(self.buckets, self.slots_per_bucket, self.fingerprint_bits)
    }

    /// Whether the configured fingerprint meets the target rate.
    pub fn meets_target(&self) -> bool {
        self.bound() <= self.target_fpr
    }
}
