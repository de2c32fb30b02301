//! Exact p-adic computation of the distinguished (minimally divisible)
//! reciprocal zeta root of hypersurface fibers over finite fields, paired
//! with a brute-force point-counting oracle that verifies every claim.

pub mod arith;
pub mod counting;
pub mod error;
pub mod family;
pub mod ff;
pub mod frobenius;
pub mod hasse;
pub mod intlin;
pub mod margins;
pub mod onevar;
pub mod series;
pub mod splitting;
pub mod tower;

pub use error::{Error, Result};
pub use ff::{FieldContext, FqElem};
