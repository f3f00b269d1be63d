//! Spectral analysis of bounded Jacobi operators on star-like graphs.
//!
//! A star-like graph is a finite compact component `K` with `m` half-line
//! branches attached at distinct vertices. The crate builds such graphs,
//! applies and truncates the Jacobi operator
//! `(J psi)(v) = sum_{w ~ v} a_{vw} psi(w) + b_v psi(v)`, and estimates the
//! spectral multiplicity `N(E)` through boundary values of the resolvent on
//! `K`, subordinate solutions on the branches, and the symmetry sectors of
//! the symmetric star.

pub mod cli;
pub mod error;
pub mod graph;
pub mod halfline;
pub mod operator;
pub mod oracle;
pub mod sharpness;
pub mod spectral;

pub use error::{Error, Result};
