//! Birman–Schwinger spectral toolkit for a mobile impurity coupled to an
//! ideal Fermi gas in a two-dimensional periodic box.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod convergence;
pub mod delta;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod molecule;
pub mod polaron;
pub mod renorm;
pub mod linalg;
pub mod richardson;
pub mod roots;
pub mod schur;
pub mod suite;

pub use error::{Error, Result};
