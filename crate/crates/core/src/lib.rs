//! Yosida-regularized quasi-static perfect plasticity on P1/P0 finite elements,
//! with optimal Dirichlet boundary control by a discrete adjoint.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod solver;
pub mod tensor;
pub mod yield_set;

pub use error::{Error, Result};
