//! Closed-form quantities of the linearized analysis around the radial flow
//! `H(p) = e^{gamma (p+1)} - 1`, and the pitchfork-direction classification.
//!
//! Everything here is an explicit function of the parameter pair
//! `(gamma, p0^2)`; the sign convention `p0 < 0` is recorded but no formula in
//! scope needs the sign. Expressions are factored through `exp_m1` so that the
//! `e^{2 gamma} - 1` factors stay accurate for small `gamma`.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Model parameters `(gamma, p0^2)` for the annular traveling-wave problem.
///
/// Valid iff `0 < gamma < 1` and `p0^2 < gamma^2 e^{4 gamma}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    /// Square of the relative mass flux. `p0` itself is negative.
    pub p0sq: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, p0sq: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        if !(p0sq >= 0.0) || !p0sq.is_finite() {
            return Err(Error::InvalidParams(format!(
                "p0sq must be finite and >= 0, got {p0sq}"
            )));
        }
        let bound = gamma * gamma * (4.0 * gamma).exp();
        if p0sq >= bound {
            return Err(Error::InvalidParams(format!(
                "p0sq = {p0sq} violates p0sq < gamma^2 e^{{4 gamma}} = {bound}"
            )));
        }
        Ok(Self { gamma, p0sq })
    }

    /// Relative mass flux `p0 = -sqrt(p0sq)` (negative by convention).
    pub fn p0(&self) -> f64 {
        -self.p0sq.sqrt()
    }

    /// Upper feasibility bound `gamma^2 e^{4 gamma}` for `p0sq`.
    pub fn p0sq_bound(&self) -> f64 {
        self.gamma * self.gamma * (4.0 * self.gamma).exp()
    }
}

/// Pitchfork direction, decided by the sign of the indicator `o_total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BifurcationClass {
    Supercritical,
    Subcritical,
    /// `|o_total|` not resolvable against the configured tolerance.
    Degenerate,
}

impl std::fmt::Display for BifurcationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BifurcationClass::Supercritical => write!(f, "supercritical"),
            BifurcationClass::Subcritical => write!(f, "subcritical"),
            BifurcationClass::Degenerate => write!(f, "degenerate"),
        }
    }
}

/// Bundle of every closed form at one parameter point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClosedForms {
    pub alpha_s: f64,
    pub alpha_c: f64,
    pub c_hat: f64,
    pub c_zero: f64,
    pub z1: f64,
    pub z2: f64,
    pub o1: f64,
    pub o2: f64,
    pub o_total: f64,
}

impl ClosedForms {
    pub fn evaluate(params: &ModelParams) -> Result<Self> {
        let (z1, z2) = z_coeffs(params);
        Ok(Self {
            alpha_s: alpha_s(params),
            alpha_c: alpha_c(params),
            c_hat: c_hat(params.gamma),
            c_zero: c_zero(params)?,
            z1,
            z2,
            o1: o1(params)?,
            o2: o2(params)?,
            o_total: o_total(params)?,
        })
    }
}

/// Head `lambda(alpha, gamma) = (p0^2 + e^{3 gamma} gamma^2 (2 alpha - e^gamma)) / (2 gamma^2 e^{2 gamma})`.
///
/// Nonnegative for `alpha >= alpha_s`.
pub fn lambda_of(params: &ModelParams, alpha: f64) -> f64 {
    let g = params.gamma;
    (params.p0sq + (3.0 * g).exp() * g * g * (2.0 * alpha - g.exp())) / (2.0 * g * g * (2.0 * g).exp())
}

/// Lower admissibility bound `alpha_s = (e^gamma - p0^2 / (e^{3 gamma} gamma^2)) / 2`.
pub fn alpha_s(params: &ModelParams) -> f64 {
    let g = params.gamma;
    0.5 * (g.exp() - params.p0sq / ((3.0 * g).exp() * g * g))
}

/// Critical value `alpha_c = e^gamma + 2 p0^2 / (gamma^2 e^gamma (e^{2 gamma} - 1))`.
pub fn alpha_c(params: &ModelParams) -> f64 {
    let g = params.gamma;
    g.exp() + 2.0 * params.p0sq / (g * g * g.exp() * (2.0 * g).exp_m1())
}

/// Boundary coefficient `beta(alpha, gamma) = gamma^2 e^{3 gamma} (alpha - e^gamma)`.
pub fn beta(params: &ModelParams, alpha: f64) -> f64 {
    let g = params.gamma;
    g * g * (3.0 * g).exp() * (alpha - g.exp())
}

/// Determinant of the 2x2 critical condition; vanishes exactly at `alpha = alpha_c`.
///
/// Rows: `[1, 1]` and `[e^{2 gamma} beta - 2 p0^2 e^{2 gamma}, beta]`.
pub fn critical_determinant(params: &ModelParams, alpha: f64) -> f64 {
    let b = beta(params, alpha);
    let e2 = (2.0 * params.gamma).exp();
    b - (e2 * b - 2.0 * params.p0sq * e2)
}

/// Solve the critical-pair system for `(alpha_c, p0sq)` given `(gamma, lambda)`.
///
/// The two relations are linear in `(alpha_c, p0sq)`:
/// `alpha_c - 2 p0^2/(gamma^2 e^gamma (e^{2 gamma}-1)) = e^gamma` and
/// `2 gamma^2 e^{3 gamma} alpha_c + p0^2 = gamma^2 e^{2 gamma} (2 lambda + e^{2 gamma})`.
pub fn solve_critical_pair(gamma: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma < 1.0) || !gamma.is_finite() || !lambda.is_finite() {
        return Err(Error::InvalidParams(format!(
            "need 0 < gamma < 1 and finite lambda, got gamma={gamma}, lambda={lambda}"
        )));
    }
    let eg = gamma.exp();
    let e2 = (2.0 * gamma).exp();
    let ac = eg * (4.0 * lambda + 3.0 * e2 - 1.0) / (5.0 * e2 - 1.0);
    let p0sq = gamma * gamma * eg * (2.0 * gamma).exp_m1() * (ac - eg) / 2.0;
    if p0sq < 0.0 {
        return Err(Error::Infeasible(format!(
            "(gamma, lambda) = ({gamma}, {lambda}) gives negative p0sq = {p0sq}"
        )));
    }
    let bound = gamma * gamma * (4.0 * gamma).exp();
    if p0sq >= bound {
        return Err(Error::Infeasible(format!(
            "(gamma, lambda) = ({gamma}, {lambda}) gives p0sq = {p0sq} >= gamma^2 e^{{4 gamma}} = {bound}"
        )));
    }
    Ok((ac, p0sq))
}

/// Normalization constant of the null mode: `Chat = sqrt(pi [1/(4g) + (3+4g)/(4g e^{4g}) - 1/(g e^{2g})])`.
///
/// `Chat^2` equals the channel integral of `null_mode^2`.
pub fn c_hat(gamma: f64) -> f64 {
    let g = gamma;
    (std::f64::consts::PI
        * (1.0 / (4.0 * g) + (3.0 + 4.0 * g) / (4.0 * g * (4.0 * g).exp()) - 1.0 / (g * (2.0 * g).exp())))
    .sqrt()
}

/// Normalization constant of the range-complement element `h0`.
///
/// `C0^2 = pi [ e^{-12g}(e^{2g}-1)^3(e^{2g}+3)/(24g) + g^2 (e^{-3g}-e^{-5g})^2/(4 p0^4) ]`.
pub fn c_zero(params: &ModelParams) -> Result<f64> {
    if params.p0sq == 0.0 {
        return Err(Error::InvalidParams(
            "c_zero is undefined at p0sq = 0 (1/p0^4 term)".into(),
        ));
    }
    let g = params.gamma;
    let e2m1 = (2.0 * g).exp_m1();
    let t1 = (-12.0 * g).exp() * e2m1.powi(3) * ((2.0 * g).exp() + 3.0) / (24.0 * g);
    let t2 = g * g * ((-3.0 * g).exp() - (-5.0 * g).exp()).powi(2) / (4.0 * params.p0sq * params.p0sq);
    Ok((std::f64::consts::PI * (t1 + t2)).sqrt())
}

/// The pair `(z1, z2)` of boundary coefficients of the second Frechet derivative
/// along the null mode.
pub fn z_coeffs(params: &ModelParams) -> (f64, f64) {
    let g = params.gamma;
    let p2 = params.p0sq;
    let e2 = (2.0 * g).exp();
    let e4 = (4.0 * g).exp();
    let em2 = (-2.0 * g).exp();
    let em4 = (-4.0 * g).exp();
    let common = g * g * (1.0 - 2.0 * e2 + e4);
    let z1 = common - p2 * em4 + 2.0 * p2 * em2 - 13.0 * p2;
    let z2 = common + p2 * em4 - 2.0 * p2 * em2 - 11.0 * p2;
    (z1, z2)
}

fn require_positive_flux(params: &ModelParams, what: &str) -> Result<()> {
    if params.p0sq == 0.0 {
        return Err(Error::InvalidParams(format!(
            "{what} is undefined at p0sq = 0"
        )));
    }
    Ok(())
}

/// Cubic (third-derivative) part of the bifurcation indicator.
///
/// Normalized so that `o1 + o2 = o_total` holds identically; see `o_total` for
/// the normalization convention.
pub fn o1(params: &ModelParams) -> Result<f64> {
    require_positive_flux(params, "o1")?;
    let g = params.gamma;
    let p2 = params.p0sq;
    let g2 = g * g;
    let e = |x: f64| (x * g).exp();
    let series = 4.5 * e(3.0) - 15.0 * e(1.0) - 4.0 * p2 * e(-7.0) / g2
        + e(-5.0) * (1.5 - 12.0 * p2 / g2 - 8.0 * p2 / g)
        + e(-3.0) * (44.0 * p2 / g2 - 9.0)
        + e(-1.0) * (18.0 - 28.0 * p2 / g2);
    Ok(-series * 36.0 * g2 * p2 * e(9.0))
}

/// Second-order (chain) part of the bifurcation indicator, same normalization as `o_total`.
pub fn o2(params: &ModelParams) -> Result<f64> {
    require_positive_flux(params, "o2")?;
    let g = params.gamma;
    let p2 = params.p0sq;
    let p4 = p2 * p2;
    let g2 = g * g;
    let g3 = g2 * g;
    let g4 = g2 * g2;
    let e = |x: f64| (x * g).exp();
    Ok(60.0 * p4 - 63.0 * g4 * e(16.0) + 18.0 * g4 * e(18.0) + 86.0 * p4 * e(2.0)
        + e(4.0) * (864.0 * g * p4 + 530.0 * p4 - 25.0 * g2 * p2)
        + e(6.0) * (576.0 * g * p4 - 2230.0 * p4 + 144.0 * g3 * p2 + 324.0 * g2 * p2)
        + e(8.0) * (27.0 * g4 + 576.0 * g * p4 + 114.0 * p4 - 72.0 * g3 * p2 - 930.0 * g2 * p2)
        + e(10.0) * (1440.0 * p4 - 72.0 * g4 + 448.0 * g2 * p2)
        + e(12.0) * (36.0 * g4 - 72.0 * g3 * p2 + 507.0 * g2 * p2)
        + e(14.0) * (54.0 * g4 - 324.0 * g2 * p2))
}

/// Bifurcation-type indicator; supercritical iff positive, subcritical iff negative.
///
/// Convention: this is the bracket of the closed-form indicator, i.e. the full
/// expression stripped of its strictly positive prefactor
/// `1/(36 gamma^2 Chat^2 p0^2 (e^{2 gamma}-1)^2 e^{9 gamma})`, which cannot
/// change the sign. `o1` and `o2` carry the same normalization, and
/// `o1 + o2 = o_total` holds identically.
pub fn o_total(params: &ModelParams) -> Result<f64> {
    require_positive_flux(params, "o_total")?;
    let g = params.gamma;
    let p2 = params.p0sq;
    let p4 = p2 * p2;
    let g2 = g * g;
    let g3 = g2 * g;
    let g4 = g2 * g2;
    let e = |x: f64| (x * g).exp();
    Ok(60.0 * p4 + 230.0 * p4 * e(2.0)
        + e(4.0) * (962.0 * p4 - 79.0 * g2 * p2 + 1152.0 * g * p4)
        + e(6.0) * (576.0 * g * p4 - 3814.0 * p4 + 144.0 * g3 * p2 + 648.0 * g2 * p2)
        + e(8.0) * (27.0 * g4 + 576.0 * g * p4 + 1122.0 * p4 - 72.0 * g3 * p2 - 1578.0 * g2 * p2)
        + e(10.0) * (1440.0 * p4 - 72.0 * g4 + 988.0 * g2 * p2)
        + e(14.0) * (54.0 * g4 - 324.0 * g2 * p2)
        + e(12.0) * (36.0 * g4 - 72.0 * g3 * p2 + 345.0 * g2 * p2)
        - 63.0 * g4 * e(16.0) + 18.0 * g4 * e(18.0))
}

/// Default tolerance below which `classify` reports `Degenerate`.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// Classify the pitchfork direction by the sign of `o_total` against `tol`.
pub fn classify(params: &ModelParams, tol: f64) -> Result<BifurcationClass> {
    let o = o_total(params)?;
    Ok(if o > tol {
        BifurcationClass::Supercritical
    } else if o < -tol {
        BifurcationClass::Subcritical
    } else {
        BifurcationClass::Degenerate
    })
}

/// The radial trivial solution `H(p) = e^{gamma (p+1)} - 1`.
pub fn trivial_h(gamma: f64, p: f64) -> f64 {
    (gamma * (p + 1.0)).exp_m1()
}

/// Generator of the one-dimensional null space at `alpha_c`:
/// `h*(q, p) = (e^{2 gamma p} - e^{-2 gamma}) cos q`.
pub fn null_mode(gamma: f64, q: f64, p: f64) -> f64 {
    ((2.0 * gamma * p).exp() - (-2.0 * gamma).exp()) * q.cos()
}

/// Explicit particular solution `(h1 + h2)/Chat^2` of the auxiliary PDE with
/// right-hand side given by the second Frechet derivative along the null mode.
pub fn particular_solution(params: &ModelParams, q: f64, p: f64) -> Result<f64> {
    require_positive_flux(params, "particular_solution")?;
    let g = params.gamma;
    let p2 = params.p0sq;
    let e = |x: f64| x.exp();
    let cos2q = (2.0 * q).cos();
    let h1 = -1.5 * e(g * (3.0 * p - 1.0)) + 0.5 * e(-g * (p + 5.0)) + e(g * (p - 3.0)) * cos2q;
    let h2 = 4.0 * g * p * e(g * (p - 3.0)) - 4.0 * e(g * (p - 3.0))
        + 4.0 * g * p * e(g * (p - 1.0))
        + e(g * (p - 1.0))
        + 4.0 * g * p * e(g * (p + 1.0))
        + 4.0 * e(g * (p + 1.0))
        + g.powi(3) * p * e(g * (p - 1.0)) / p2
        - g.powi(3) * p * e(g * (p + 1.0)) / (2.0 * p2)
        - g.powi(3) * p * e(g * (p + 5.0)) / (2.0 * p2)
        - g * g * e(g * (p - 1.0)) / (2.0 * p2)
        + g * g * e(g * (p + 1.0)) / (2.0 * p2)
        + g * g * e(g * (p + 3.0)) / (2.0 * p2)
        - g * g * e(g * (p + 5.0)) / (2.0 * p2)
        + (11.0 / 6.0 * e(-g * (p + 1.0)) - 11.0 / 9.0 * e(-g * (p + 3.0))
            - 4.0 / 3.0 * e(-g * (p + 5.0))
            - 5.0 / 18.0 * e(3.0 * g * (p - 5.0 / 3.0))
            - g * g * e(-g * (p + 1.0)) / (2.0 * p2)
            + g * g * e(3.0 * g * (p + 1.0)) / (2.0 * p2))
            * cos2q;
    let chat = c_hat(g);
    Ok((h1 + h2) / (chat * chat))
}

/// Interior right-hand side of the auxiliary PDE solved by `particular_solution`:
/// `2 gamma^2 e^{(p-3) gamma} (1 - 2 e^{2(p+1) gamma} cos 2q - 3 e^{4(p+1) gamma}) / Chat^2`.
pub fn particular_rhs_interior(params: &ModelParams, q: f64, p: f64) -> f64 {
    let g = params.gamma;
    let chat = c_hat(g);
    2.0 * g * g * ((p - 3.0) * g).exp()
        * (1.0 - 2.0 * (2.0 * (p + 1.0) * g).exp() * (2.0 * q).cos() - 3.0 * (4.0 * (p + 1.0) * g).exp())
        / (chat * chat)
}

/// Boundary right-hand side of the auxiliary PDE: `(z1 + z2 cos 2q)/Chat^2` at `p = 0`.
pub fn particular_rhs_top(params: &ModelParams, q: f64) -> f64 {
    let (z1, z2) = z_coeffs(params);
    let chat = c_hat(params.gamma);
    (z1 + z2 * (2.0 * q).cos()) / (chat * chat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::*;

    const EX1_ALPHA_S: f64 = 0.5699245172534297111;

    fn ex1() -> ModelParams {
        ModelParams::new(EX1_GAMMA, EX1_P0SQ).unwrap()
    }

    fn ex2() -> ModelParams {
        ModelParams::new(EX2_GAMMA, EX2_P0SQ).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 0.0).is_err());
        assert!(ModelParams::new(0.5, -1e-12).is_err());
        // boundary of the validity region
        let g = 0.4f64;
        let bound = g * g * (4.0 * g).exp();
        assert!(ModelParams::new(g, bound).is_err());
        assert!(ModelParams::new(g, bound * (1.0 - 1e-12)).is_ok());
    }

    #[test]
    fn lambda_vanishes_at_alpha_s() {
        for (g, p2) in [(0.2, 0.005), (0.5, 0.1), (0.05, 1e-4), (0.9, 1.0)] {
            let params = ModelParams::new(g, p2).unwrap();
            let v = lambda_of(&params, alpha_s(&params));
            assert!(v.abs() < 1e-14, "lambda(alpha_s) = {v}");
        }
    }

    #[test]
    fn lambda_matches_benchmark_points() {
        assert!((lambda_of(&ex1(), EX1_ALPHA_C) - 1.4).abs() < 1e-12);
        assert!((lambda_of(&ex2(), EX2_ALPHA_C) - 1.15).abs() < 1e-12);
    }

    #[test]
    fn alpha_s_closed_forms() {
        let g = 0.37;
        let boundary = ModelParams {
            gamma: g,
            p0sq: g * g * (4.0 * g).exp(),
        };
        assert!(alpha_s(&boundary).abs() < 1e-15);
        let zero_flux = ModelParams::new(g, 0.0).unwrap();
        assert!((alpha_s(&zero_flux) - g.exp() / 2.0).abs() < 1e-15);
        assert!((alpha_s(&ex1()) - EX1_ALPHA_S).abs() < 1e-15);
        assert!((alpha_s(&ex2()) - 0.6569868803300499936).abs() < 1e-15);
    }

    #[test]
    fn alpha_c_values() {
        assert!((alpha_c(&ex1()) - EX1_ALPHA_C).abs() < 1e-5);
        assert!((alpha_c(&ex2()) - EX2_ALPHA_C).abs() < 1e-5);
        let g = 0.6;
        let p = ModelParams::new(g, 0.0).unwrap();
        assert!((alpha_c(&p) - g.exp()).abs() < 1e-15);
    }

    #[test]
    fn determinant_identity_at_alpha_c() {
        for (g, p2) in [(0.2, EX1_P0SQ), (0.3, EX2_P0SQ), (0.07, 1e-5), (0.85, 0.5)] {
            let params = ModelParams::new(g, p2).unwrap();
            let ac = alpha_c(&params);
            let det = critical_determinant(&params, ac);
            let scale = (beta(&params, ac) * (2.0 * g).exp()).abs().max(1e-300);
            assert!(det.abs() / scale < 1e-12, "det = {det} at gamma={g}");
        }
    }

    #[test]
    fn beta_identity_at_alpha_c() {
        // beta(alpha_c) = 2 p0^2 e^{2 gamma} / (e^{2 gamma} - 1), by substitution.
        for (g, p2) in [(0.2, EX1_P0SQ), (0.3, EX2_P0SQ), (0.5, 0.02)] {
            let params = ModelParams::new(g, p2).unwrap();
            let lhs = beta(&params, alpha_c(&params));
            let rhs = 2.0 * p2 * (2.0 * g).exp() / (2.0 * g).exp_m1();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn solve_critical_pair_benchmarks() {
        let (ac, p0sq) = solve_critical_pair(EX1_GAMMA, EX1_LAMBDA).unwrap();
        assert!((ac - EX1_ALPHA_C).abs() < 1e-12);
        assert!((p0sq - EX1_P0SQ).abs() < 1e-15);
        let (ac, p0sq) = solve_critical_pair(EX2_GAMMA, EX2_LAMBDA).unwrap();
        assert!((ac - EX2_ALPHA_C).abs() < 1e-12);
        assert!((p0sq - EX2_P0SQ).abs() < 1e-15);
    }

    #[test]
    fn solve_critical_pair_degenerate_and_roundtrip() {
        let g = 0.45f64;
        let (ac, p0sq) = solve_critical_pair(g, (2.0 * g).exp() / 2.0).unwrap();
        assert!((ac - g.exp()).abs() < 1e-14);
        assert!(p0sq.abs() < 1e-16);
        // feeding p0sq back reproduces alpha_c to 1e-12 relative
        for (g, l) in [(0.2, 1.4), (0.3, 1.15), (0.6, 2.0), (0.1, 0.7)] {
            let (ac, p0sq) = solve_critical_pair(g, l).unwrap();
            let params = ModelParams::new(g, p0sq).unwrap();
            assert!((alpha_c(&params) - ac).abs() <= 1e-12 * ac.abs());
        }
    }

    #[test]
    fn solve_critical_pair_infeasible() {
        // lambda below e^{2 gamma}/2 makes p0sq negative
        assert!(matches!(
            solve_critical_pair(0.2, 0.2),
            Err(Error::Infeasible(_))
        ));
        // very large lambda pushes p0sq past the validity bound
        assert!(matches!(
            solve_critical_pair(0.2, 50.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn beta_vanishes_at_e_gamma() {
        let params = ModelParams::new(0.33, 0.01).unwrap();
        assert_eq!(beta(&params, 0.33f64.exp()), 0.0);
    }

    #[test]
    fn chat_and_czero_reference_values() {
        assert!((c_hat(0.2) - 0.3205758513823076818).abs() < 1e-15);
        assert!((c_hat(0.3) - 0.4273817920757287476).abs() < 1e-15);
        assert!((c_zero(&ex1()).unwrap() - 5.398173993852859281).abs() < 1e-12);
        assert!((c_zero(&ex2()).unwrap() - 6.14217149433241132).abs() < 1e-12);
        let zero_flux = ModelParams::new(0.2, 0.0).unwrap();
        assert!(c_zero(&zero_flux).is_err());
    }

    #[test]
    fn z_coeffs_structure() {
        // z1 - z2 = -2 p0^2 e^{-4g} + 4 p0^2 e^{-2g} - 2 p0^2 (symbolic subtraction)
        for (g, p2) in [(0.2, EX1_P0SQ), (0.3, EX2_P0SQ), (0.7, 0.3)] {
            let params = ModelParams::new(g, p2).unwrap();
            let (z1, z2) = z_coeffs(&params);
            let expected = -2.0 * p2 * (-4.0 * g).exp() + 4.0 * p2 * (-2.0 * g).exp() - 2.0 * p2;
            assert!((z1 - z2 - expected).abs() < 1e-15 * (1.0 + expected.abs()));
        }
        // p0sq = 0 collapses both to the common gamma part
        let g = 0.4f64;
        let (z1, z2) = z_coeffs(&ModelParams::new(g, 0.0).unwrap());
        assert_eq!(z1, z2);
        let common = g * g * (2.0 * g).exp_m1().powi(2);
        assert!((z1 - common).abs() < 1e-13 * common);
        // reference values
        let (z1, z2) = z_coeffs(&ex1());
        assert!((z1 - -0.06229866291173711304).abs() < 1e-15);
        assert!((z2 - -0.06100656461759581211).abs() < 1e-15);
    }

    #[test]
    fn o_values_at_benchmarks() {
        assert!((o_total(&ex1()).unwrap() - 0.218807).abs() < 1e-5);
        assert!((o_total(&ex2()).unwrap() - -0.150203).abs() < 1e-5);
        // tighter, against the 40-digit evaluation; the bracket sums terms up
        // to ~60 in magnitude, so double evaluation carries a few hundred ulps
        assert!((o_total(&ex1()).unwrap() - 0.2188069232367365079).abs() < 2e-13);
        assert!((o_total(&ex2()).unwrap() - -0.1502029540004942254).abs() < 2e-13);
        assert!((o1(&ex1()).unwrap() - 0.02486089556113422928).abs() < 2e-13);
        assert!((o2(&ex1()).unwrap() - 0.1939460276756022786).abs() < 2e-13);
    }

    #[test]
    fn o_split_consistency() {
        for (g, p2) in [
            (0.2, EX1_P0SQ),
            (0.3, EX2_P0SQ),
            (0.05, 1e-5),
            (0.5, 0.05),
            (0.9, 1.2),
        ] {
            let params = ModelParams::new(g, p2).unwrap();
            let s = o1(&params).unwrap() + o2(&params).unwrap();
            let o = o_total(&params).unwrap();
            assert!(
                (s - o).abs() <= 1e-10 * o.abs().max(1e-30),
                "o1+o2 = {s}, o_total = {o} at gamma={g}, p0sq={p2}"
            );
        }
    }

    #[test]
    fn o_undefined_at_zero_flux() {
        let p = ModelParams::new(0.2, 0.0).unwrap();
        assert!(o_total(&p).is_err());
        assert!(o1(&p).is_err());
        assert!(o2(&p).is_err());
    }

    #[test]
    fn classify_benchmarks_and_tol_stability() {
        assert_eq!(
            classify(&ex1(), DEFAULT_CLASSIFY_TOL).unwrap(),
            BifurcationClass::Supercritical
        );
        assert_eq!(
            classify(&ex2(), DEFAULT_CLASSIFY_TOL).unwrap(),
            BifurcationClass::Subcritical
        );
        // tag invariant under any tolerance below |o_total|
        let o = o_total(&ex1()).unwrap().abs();
        for f in [1e-12, 1e-9, 1e-6, 1e-3] {
            let tol = o * f;
            assert_eq!(
                classify(&ex1(), tol).unwrap(),
                BifurcationClass::Supercritical
            );
        }
        // |o_total| <= tol is degenerate
        assert_eq!(
            classify(&ex1(), o * 2.0).unwrap(),
            BifurcationClass::Degenerate
        );
    }

    #[test]
    fn trivial_h_values() {
        assert_eq!(trivial_h(0.7, -1.0), 0.0);
        assert!((trivial_h(0.2, 0.0) - 0.2214027581601698339).abs() < 1e-16);
        // monotone increasing in p
        let g = 0.55;
        let mut prev = trivial_h(g, -1.0);
        for i in 1..=50 {
            let p = -1.0 + i as f64 / 50.0;
            let v = trivial_h(g, p);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn null_mode_values() {
        let g = 0.42;
        assert!(null_mode(g, 1.3, -1.0).abs() < 1e-16);
        assert!(null_mode(g, std::f64::consts::FRAC_PI_2, -0.3).abs() < 1e-16);
        assert!((null_mode(g, 0.0, 0.0) - (1.0 - (-2.0 * g).exp())).abs() < 1e-16);
    }

    #[test]
    fn particular_solution_finite_at_quarter_period() {
        // all cos 2q terms contribute a factor -1 at q = pi/2; value matches the
        // formula with cos2q = -1 substituted
        let params = ex1();
        let q = std::f64::consts::FRAC_PI_2;
        for p in [-1.0, -0.5, 0.0] {
            let v = particular_solution(&params, q, p).unwrap();
            assert!(v.is_finite());
            let again = particular_solution(&params, q + std::f64::consts::PI, p).unwrap();
            assert!((v - again).abs() < 1e-12, "period pi in q");
        }
        let zero_flux = ModelParams::new(0.2, 0.0).unwrap();
        assert!(particular_solution(&zero_flux, 0.1, -0.5).is_err());
    }
}
