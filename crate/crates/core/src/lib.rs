//! Counting cuckoo filters for multisets, a counting Bloom filter baseline,
//! false-positive analysis, and a two-host synchronization protocol.

pub mod cbf;
pub mod ccf;
pub mod codec;
pub mod hash;
pub mod multiset;
pub mod scalar;
pub mod sync;
pub mod theory;

pub use cbf::{Cbf, CbfError, CbfParams};
pub use ccf::{Candidates, Ccf, CcfError, CcfParams, CollisionDetector, Probe, Slot};
pub use codec::DecodeError;
pub use multiset::{Element, Multiset, MultisetError};
pub use scalar::Scalar;
pub use theory::{TheoryError, TheoryQuery};

/// Exact rational scalar for analytic results.
pub type Exact = num_rational::BigRational;
pub type TheoryQueryF64 = TheoryQuery<f64>;
pub type TheoryQueryF32 = TheoryQuery<f32>;
pub type TheoryQueryExact = TheoryQuery<Exact>;
