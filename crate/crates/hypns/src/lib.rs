//! Geometric Navier–Stokes machinery on the hyperbolic plane.
//!
//! Scalars live at the nodes of a half-offset polar grid. Velocities that are
//! evolved in time live on cell faces (a staggered layout, see [`mac`]), which
//! makes the discrete divergence, gradient and Hodge Laplacian exact adjoints.
//! Node-based vector fields are used for the covariant analysis operators in
//! [`ops`].

pub mod cli;
pub mod config;
pub mod elliptic;
pub mod estimates;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod mac;
pub mod navier_stokes;
pub mod nonunique;
pub mod ops;
pub mod semigroup;
pub mod spectral;

pub use geometry::{ChartPoint, ManifoldModel};
pub use grid::{CovectorField, Grid, ScalarField, TensorField11, TensorField20, VectorField};
pub use mac::FaceField;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate chart at r = {0} (the pole is not a valid chart point)")]
    DegenerateChart(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("solver failed to converge after {iterations} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("Picard iteration is not contracting: {0}")]
    NonContraction(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
