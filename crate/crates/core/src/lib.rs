//! Globally optimal multisine waveforms for wireless power transfer.
//!
//! The crate models a multi-tone transmitter, a frequency-selective channel
//! and a non-linear rectifier, reduces waveform design to a non-convex
//! linearly constrained quadratic program, and solves that program to global
//! optimality with a complementarity branch-and-bound and an equivalent
//! mixed-integer LP. An exhaustive KKT enumeration certifies both at small
//! scale.

pub mod bench;
pub mod channel;
pub mod error;
pub mod harvester;
pub mod lp;
pub mod qp;
pub mod solution;
pub mod solvers;
pub mod waveform;

pub use error::{Error, Result};
pub use solution::{Method, SolveStats, Solution};
