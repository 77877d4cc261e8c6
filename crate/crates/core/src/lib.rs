//! Extremal Laplace eigenvalue sequences over families of disjoint
//! unions of scaled copies of a generator domain.
//!
//! The pipeline has three stages:
//!
//! 1. [`spectrum`] produces complete, sorted eigenvalue lists of
//!    unit-volume generators (boxes by lattice sweep, the disk from
//!    Bessel zeros via [`bessel`], or explicit files);
//! 2. [`extremal`] turns one or more spectra into the table of extremal
//!    powers `lambda_k^{d/2}` by dynamic programming over split points,
//!    together with the records needed to reconstruct extremisers;
//! 3. [`diagnostics`] evaluates the conjecture indicators on a table:
//!    the set of generator ranks and its log-density, component counts,
//!    largest scale factors, universal-bound and additivity audits, Weyl
//!    fits, and propagation checks.

pub mod bessel;
pub mod diagnostics;
pub mod error;
pub mod extremal;
pub mod spectrum;
pub mod table_io;

pub use error::{Error, Result};
