//! Time-domain acoustic scattering by obstacles with generalized impedance
//! boundary conditions: Galerkin boundary elements (P0 Neumann, P1 Dirichlet
//! traces) in space and BDF convolution quadrature in time.
//!
//! The usual entry points are [`config::RunConfig`] and the commands in
//! [`app`]. Lower-level pieces: [`cq`] for convolution quadrature,
//! [`bem`] for the boundary integral operators, [`calderon`] for the
//! frequency-domain system, [`scatter`] for the time-domain driver and
//! [`reference`] for the semi-analytic sphere solution.

// `!(x > 0.0)` also rejects NaN, which is the point in the validation code;
// index loops over 3-vertex arrays read better than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod app;
pub mod bem;
pub mod cache;
pub mod calderon;
pub mod config;
pub mod cq;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod reference;
pub mod scatter;
pub mod spaces;
pub mod symbols;

pub use error::{Error, Result};
