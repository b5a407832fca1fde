//! Numerical toolkit for steady traveling water waves in an annular channel with
//! radial gravity and constant vorticity.
//!
//! The flow is reduced, through a semi-hodograph transform, to a height function
//! `h(q, p)` on the fixed periodic channel `[0, 2pi) x [-1, 0]`. The crate provides:
//!
//! - [`params`]: every closed-form quantity of the linearized analysis (critical
//!   values, normalization constants, the bifurcation-type indicator) and the
//!   classification of the pitchfork direction;
//! - [`fields`]: spectral grids on the channel (Fourier in `q`, Chebyshev in `p`),
//!   differentiation, traces and quadrature;
//! - [`linops`]: the linearized operators, per-wavenumber eigensolvers, the
//!   numerical critical value, Morse indices and range/orthogonality checks;
//! - [`nonlinear`]: the nonlinear residual, Newton solver, and pseudo-arclength
//!   continuation of the bifurcating branch;
//! - [`reconstruct`]: inversion of the semi-hodograph map back to the annulus
//!   (stream function, free surface, velocities, pressure, conservation checks);
//! - [`sweep`]: parameter-region classification over the `(gamma, lambda)` plane.
//!
//! With the default `parallel` feature, region sweeps, eigenvalue scans and
//! per-ray stream integrations run data-parallel on rayon; without it every
//! code path falls back to the equivalent sequential loop.

pub mod benchmarks;
pub mod error;
pub mod fields;
pub mod linops;
pub mod nonlinear;
mod operator;
pub mod params;
pub mod reconstruct;
pub mod sweep;

pub use error::Error;
pub use params::{BifurcationClass, ClosedForms, ModelParams};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
