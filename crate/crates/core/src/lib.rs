//! Straight-track reconstruction from detector hits through a relaxed Ising
//! model over hit doublets, solved either classically (pseudo-inverse) or by a
//! statevector simulation of the HHL linear-system algorithm.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod doublets;
pub mod error;
pub mod event;
pub mod hhl;
pub mod ising;
pub mod linalg;
pub mod metrics;
pub mod studies;
pub mod toy;
pub mod tracks;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
