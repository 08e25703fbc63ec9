//! Spectral Sobolev-space calculus on the torus `T^n` (`n` in `{1, 2}`).
//!
//! Elements of `H^s(T^n)` are represented by their Fourier coefficients on a
//! uniform periodic grid ([`Spectrum`]); diffeomorphisms `phi = id + u` carry
//! a Jacobian-positivity certificate ([`Diffeo`]). On top of this sit the norm
//! computations, dealiased products and quotients, composition and Newton
//! inversion, the Taylor calculus of `(u, phi) -> u o phi`, and the geodesic
//! exponential map of a chart metric. Every certificate returns a
//! [`SuiteReport`].

// Parameter guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod calculus;
pub mod diffeo;
pub mod error;
pub mod geodesic;
pub mod grid;
pub mod io;
pub mod norms;
pub mod random;
pub mod report;
pub mod spectrum;

pub use diffeo::Diffeo;
pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec};
pub use random::{random_field, FieldSampler};
pub use report::{SuiteReport, SCHEMA_VERSION};
pub use spectrum::{forward_transform, inverse_transform, Spectrum, Truncation};
