//! Pseudospectral simulation of the randomly forced viscous Burgers equation
//!
//! ```text
//! u_t + u u_x - nu u_xx = eta,    x in S^1 = R/Z,    eta = d/dt xi
//! ```
//!
//! on zero-mean periodic fields, with the diagnostics used to study its
//! turbulence ("burgulence"): Kruzhkov one-sided derivative bounds, the Ito
//! energy ledger, ensemble/time brackets, structure functions, the energy
//! spectrum, L1 contraction of coupled solutions, recurrence times and
//! dictionary-based lower bounds on the Lipschitz-dual distance between laws.

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod ergodicity;
pub mod error;
pub mod noise;
pub mod spectral;
pub mod stats;
pub mod turbulence;

pub use error::{Error, Result};
pub use num_complex::Complex64;
