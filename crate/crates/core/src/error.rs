use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameters outside the admissible domain (gamma, p0^2 constraints).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// A `(gamma, lambda)` point whose critical pair falls outside the valid region.
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    /// Grid construction or resolution errors.
    #[error("grid error: {0}")]
    Grid(String),
    /// A state violating the admissibility invariants ((h+1) h_p > 0, bottom condition).
    #[error("inadmissible state: {0}")]
    Inadmissible(String),
    /// Eigen/linear-algebra failures that signal under-resolution.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Root bracketing failed.
    #[error("bracket error: {0}")]
    Bracket(String),
    /// Morse index requested at (or too close to) an eigenvalue crossing.
    #[error("eigenvalue crossing: {0}")]
    AtCrossing(String),
    /// Newton iteration failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// Stream-function reconstruction failed.
    #[error("reconstruction error: {0}")]
    Reconstruction(String),
    /// Not enough data for a requested fit or diagnostic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
