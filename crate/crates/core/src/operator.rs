//! Pointwise kernels of the height-function operator and its linearization.
//!
//! The residual has an interior component
//! `g1 = h_qq h_p^2 - 2 h_q h_p h_qp + h_pp h_q^2 - (h+1) h_p^2 + (h+1)^2 h_pp`
//! and a top-boundary component
//! `g2 = (h+1)^2 h_p^2 (2 lambda + (h+1)^2 - 2 alpha (h+1)) - p0^2 h_q^2 - p0^2 (h+1)^2`.
//! These kernels are shared between the full-grid operator application and the
//! half-grid Newton assembly; they act elementwise on any matrix layout.

use nalgebra::DMatrix;

/// All first and second derivatives of a height field, in matching layouts.
pub(crate) struct HDerivs {
    pub h: DMatrix<f64>,
    pub hq: DMatrix<f64>,
    pub hp: DMatrix<f64>,
    pub hqq: DMatrix<f64>,
    pub hqp: DMatrix<f64>,
    pub hpp: DMatrix<f64>,
}

/// Interior residual `g1`, elementwise.
pub(crate) fn residual_interior(d: &HDerivs) -> DMatrix<f64> {
    let mut out = d.h.clone();
    for idx in 0..out.len() {
        let h = d.h[idx];
        let hq = d.hq[idx];
        let hp = d.hp[idx];
        out[idx] = d.hqq[idx] * hp * hp - 2.0 * hq * hp * d.hqp[idx] + d.hpp[idx] * hq * hq
            - (h + 1.0) * hp * hp
            + (h + 1.0) * (h + 1.0) * d.hpp[idx];
    }
    out
}

/// Top residual `g2` for one boundary node, from the values at that node.
pub(crate) fn residual_top(h: f64, hq: f64, hp: f64, lambda: f64, alpha: f64, p0sq: f64) -> f64 {
    let hp1 = h + 1.0;
    hp1 * hp1 * hp * hp * (2.0 * lambda + hp1 * hp1 - 2.0 * alpha * hp1)
        - p0sq * hq * hq
        - p0sq * hp1 * hp1
}

/// Coefficients of the interior linearization
/// `G1'(h) phi = c_qq phi_qq + c_qp phi_qp + c_pp phi_pp + c_p phi_p + c_q phi_q + c_0 phi`.
pub(crate) struct InteriorCoeffs {
    pub c_qq: DMatrix<f64>,
    pub c_qp: DMatrix<f64>,
    pub c_pp: DMatrix<f64>,
    pub c_p: DMatrix<f64>,
    pub c_q: DMatrix<f64>,
    pub c_0: DMatrix<f64>,
}

pub(crate) fn interior_coeffs(d: &HDerivs) -> InteriorCoeffs {
    let shape = (d.h.nrows(), d.h.ncols());
    let mut c = InteriorCoeffs {
        c_qq: DMatrix::zeros(shape.0, shape.1),
        c_qp: DMatrix::zeros(shape.0, shape.1),
        c_pp: DMatrix::zeros(shape.0, shape.1),
        c_p: DMatrix::zeros(shape.0, shape.1),
        c_q: DMatrix::zeros(shape.0, shape.1),
        c_0: DMatrix::zeros(shape.0, shape.1),
    };
    for idx in 0..d.h.len() {
        let h = d.h[idx];
        let hq = d.hq[idx];
        let hp = d.hp[idx];
        let hqq = d.hqq[idx];
        let hqp = d.hqp[idx];
        let hpp = d.hpp[idx];
        let hp1 = h + 1.0;
        c.c_qq[idx] = hp * hp;
        c.c_qp[idx] = -2.0 * hq * hp;
        c.c_pp[idx] = hp1 * hp1 + hq * hq;
        c.c_p[idx] = 2.0 * hqq * hp - 2.0 * hq * hqp - 2.0 * hp1 * hp;
        c.c_q[idx] = -2.0 * hp * hqp + 2.0 * hpp * hq;
        c.c_0[idx] = -hp * hp + 2.0 * hpp * hp1;
    }
    c
}

/// Coefficients of the top-boundary linearization
/// `G2'(h) phi = d_p phi_p + d_q phi_q + d_0 phi` at one boundary node.
pub(crate) fn top_coeffs(
    h: f64,
    hq: f64,
    hp: f64,
    lambda: f64,
    alpha: f64,
    p0sq: f64,
) -> (f64, f64, f64) {
    let hp1 = h + 1.0;
    let poly = 2.0 * lambda * hp1 + hp1.powi(3) - 2.0 * alpha * hp1 * hp1;
    let d_p = 2.0 * hp1 * hp * poly;
    let d_q = -2.0 * p0sq * hq;
    let d_0 = 2.0 * hp * hp * poly + 2.0 * hp1 * hp1 * hp * hp * (hp1 - alpha) - 2.0 * p0sq * hp1;
    (d_p, d_q, d_0)
}

/// Derivative of `g2` with respect to `alpha` at one boundary node
/// (`d lambda / d alpha = e^gamma`). The interior residual does not depend on `alpha`.
pub(crate) fn top_dalpha(h: f64, hp: f64, e_gamma: f64) -> f64 {
    let hp1 = h + 1.0;
    hp1 * hp1 * hp * hp * (2.0 * e_gamma - 2.0 * hp1)
}
