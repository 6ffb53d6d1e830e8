//! Thin-film interface equations for a two-fluid Taylor-Couette flow with a
//! power-law inner fluid, discretised pseudo-spectrally on the circle.

pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod models;
pub mod oracle_fd;
mod quadrature;
pub mod rheology;
pub mod scaling;
pub mod spectral;
pub mod stepping;

pub use error::{Error, Result};
pub use quadrature::GaussLegendre;
