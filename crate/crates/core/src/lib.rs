//! Coset indexings, permutation-group normal forms, hash-based encodings of
//! flat distributions, and a desk-scale simulator of the entropy-gap
//! reduction from isomorphism problems to a minimum-description problem.

pub mod bits;
pub mod coset;
pub mod cost;
pub mod error;
pub mod flat;
pub mod fq;
pub mod group;
pub mod iso;
pub mod perm;
pub mod reduction;

pub use bits::BitString;
pub use error::{Error, Result};
pub use group::PermGroup;
pub use perm::Permutation;

/// Arbitrary-precision nonnegative rank.
pub type BigIndex = num_bigint::BigUint;
