//! Pseudo-spectral solver for the dissipative surface quasi-geostrophic equation
//! on the periodic square, with partial-regularity diagnostics.

pub mod bessel;
pub mod config;
pub mod cylinder;
pub mod datum;
pub mod diagnostics;
pub mod error;
pub mod excess;
pub mod experiment;
pub mod extension;
pub mod field;
pub mod flow;
pub mod grid;
pub mod io;
pub mod quadrature;
pub mod regularity;
pub mod solver;
pub mod spectral;

pub use cylinder::{Cylinder, CylinderShape};
pub use error::{Result, SqgError};
pub use field::{ScalarField, VectorField};
pub use grid::GridSpec;
pub use quadrature::Ball;
