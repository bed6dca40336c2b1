//! Mesh-free solver for KdV- and BBM-type dispersive wave equations on an
//! interval: local multiquadric RBF-FD differentiation matrices, method of
//! lines with classical RK4, and post-run analysis (error norms, stability
//! spectra, eventual periodicity of boundary-forced oscillations).

pub mod analysis;
pub mod config;
pub mod error;
pub mod integrate;
pub mod kernels;
pub mod models;
pub mod nodes;
pub mod operators;
pub mod runner;

pub use error::{Error, Result};
