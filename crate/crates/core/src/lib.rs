//! Derived-from-Anosov diffeomorphisms of the 3-torus.
//!
//! The crate builds three local deformations of hyperbolic toral
//! automorphisms, certifies their cone fields, partial volume expansion and
//! fixed-point spectra on sample grids, and estimates pushed-forward masses
//! and center Lyapunov exponents along strong-unstable curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bump;
pub mod construct;
pub mod error;
pub mod measure;
pub mod numeric;
pub mod relations;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
