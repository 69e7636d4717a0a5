//! Heat-kernel nonlocal Sobolev and BV functionals on discrete model spaces.
//!
//! The crate builds grids and weighted graphs ([`space`]), heat kernels on
//! them ([`heat`]), reference energies ([`calculus`]), the nonlocal
//! functionals themselves ([`functionals`]), small-time extrapolation
//! ([`limits`]) and independent oracles ([`oracle`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calculus;
pub mod error;
pub mod functionals;
pub mod heat;
pub mod limits;
pub mod oracle;
pub mod space;
pub mod special;
pub mod sum;

pub use error::{Error, Result};
