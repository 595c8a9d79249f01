//! Radial variational solver for `-Delta_H u = lambda alpha f(u)` on the
//! Poincaré ball, with the diagnostics of the sublevel-minimization
//! existence argument.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod functional;
pub mod hypgeom;
pub mod numerics;
pub mod par;
pub mod radial;
pub mod solver;
pub mod testfn;
pub mod threshold;

pub use error::{Error, Result};
