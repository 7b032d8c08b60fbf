//! Symbolic and numeric calculus on generalized Lie algebroids.
//!
//! Expressions are exact symbolic trees ([`expr`]). Structures are checked by
//! sampling residuals at seeded random points ([`check`]). The algebroid data
//! lives in [`algebroid`], differential forms in [`exterior`], vertical and
//! complete lifts with the prolongation bracket in [`prolong`], fiber
//! Legendre maps in [`legendre`] and the morphism conditions between the two
//! sides in [`duality`]. [`modelio`] reads and writes model files and
//! [`cli`] drives the `gla` binary.

#![allow(clippy::needless_range_loop)]

pub mod algebroid;
pub mod check;
pub mod cli;
pub mod duality;
pub mod expr;
pub mod exterior;
pub mod legendre;
pub mod modelio;
pub mod prolong;
