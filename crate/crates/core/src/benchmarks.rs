//! Reference parameter points used throughout the verification suites.
//!
//! The two points come from the `(gamma, lambda)` plane: one in the
//! supercritical region, one classified subcritical by the sign indicator.
//! The derived values are 40-digit evaluations of the closed forms, rounded
//! to the nearest double.

use crate::params::ModelParams;

/// First benchmark point: `(gamma, lambda) = (0.2, 1.4)`.
pub const EX1_GAMMA: f64 = 0.2;
pub const EX1_LAMBDA: f64 = 1.4;
pub const EX1_ALPHA_C: f64 = 1.716147571562604313;
pub const EX1_P0SQ: f64 = 0.005944022924421961778;

/// Second benchmark point: `(gamma, lambda) = (0.3, 1.15)`.
pub const EX2_GAMMA: f64 = 0.3;
pub const EX2_LAMBDA: f64 = 1.15;
pub const EX2_ALPHA_C: f64 = 1.50892783411402554;
pub const EX2_P0SQ: f64 = 0.007943667573453156656;

/// Parameters of the first benchmark point.
pub fn ex1() -> ModelParams {
    ModelParams::new(EX1_GAMMA, EX1_P0SQ).expect("benchmark point is valid")
}

/// Parameters of the second benchmark point.
pub fn ex2() -> ModelParams {
    ModelParams::new(EX2_GAMMA, EX2_P0SQ).expect("benchmark point is valid")
}
