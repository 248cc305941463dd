//! Exact, sampled and smoothed distributions of the number of key comparisons
//! made by randomized QuickSort, together with the numerical checks needed to
//! study its local limit behaviour.
//!
//! The crate is organised bottom-up:
//!
//! * [`pmf`]: finite integer-lattice distributions (convolution, moments,
//!   exponential tilting, class checks).
//! * [`quicksort`]: exact, brute-force and Monte Carlo laws of `Q_n`.
//! * [`execution_tree`]: two-phase QuickSort runs and the `Q_n = A + B`
//!   decomposition samplers.
//! * [`density`]: estimates of the limiting density and the semi-local check.
//! * [`smoothing`]: interval statements, flatness scans, error-term
//!   calculators and the multi-round parameter schedules.

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod density;
mod error;
pub mod execution_tree;
pub mod interval;
pub mod pmf;
pub mod quicksort;
pub mod rng;
pub mod smoothing;

pub use error::{Error, Result};
pub use interval::HalfOpen;
pub use pmf::{ClassParams, LatticePmf, TiltResult};
