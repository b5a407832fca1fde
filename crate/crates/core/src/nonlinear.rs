//! Nonlinear height-function residual, Newton solver, and pseudo-arclength
//! continuation of the branch bifurcating at `(alpha_c, H)`.
//!
//! The solver works on the even half-grid: an even field is determined by its
//! values at `q_j = 2 pi j / nq` for `j = 0..=nq/2`, and `q`-derivatives are
//! taken through the cosine interpolant, so evenness is structural and the
//! translation degeneracy never enters. The corrector solves the bordered
//! system (residual rows + arclength row) by dense LU.

use crate::fields::{Field2D, Grid, Parity};
use crate::operator::{self, HDerivs};
use crate::params::{self, BifurcationClass, ModelParams};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use std::sync::Arc;

/// A candidate solution state: an even height field plus the parameter.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub h: Field2D,
    pub alpha: f64,
}

impl StateVector {
    /// Check the admissibility invariants: zero on the bottom row, even in `q`,
    /// and `(h+1) h_p > 0` everywhere.
    pub fn validate(&self) -> Result<()> {
        let grid = &self.h.grid;
        if self.h.trace_bottom().iter().any(|v| v.abs() > 1e-13) {
            return Err(Error::Inadmissible("h must vanish on the bottom boundary".into()));
        }
        if self.h.even_defect() > 1e-10 * self.h.max_abs().max(1.0) {
            return Err(Error::Inadmissible("h must be even in q".into()));
        }
        let hp = self.h.d_p()?;
        for j in 0..grid.nq {
            for i in 0..grid.np {
                if (self.h.values[(j, i)] + 1.0) * hp.values[(j, i)] <= 0.0 {
                    return Err(Error::Inadmissible(format!(
                        "(h+1) h_p <= 0 at node ({j}, {i})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One accepted point on a continuation branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub alpha: f64,
    pub h: Field2D,
    /// Signed coefficient of `cos q` in the top trace of `h - H`.
    pub amplitude: f64,
    pub arclength: f64,
    pub residual_norm: f64,
}

/// A continuation run: the points visited and whether the run was cut short
/// by step-size exhaustion.
#[derive(Debug, Clone)]
pub struct Branch {
    pub alpha_c: f64,
    pub points: Vec<BranchPoint>,
    pub truncated: bool,
}

/// Constraint closing the Newton system.
#[derive(Debug, Clone, Copy)]
pub enum NewtonConstraint {
    /// Solve at fixed `alpha`.
    FixedAlpha,
    /// Free `alpha`, pin the signed `cos q` amplitude of the top trace.
    FixedAmplitude(f64),
}

/// Knobs for [`newton_solve`] and [`continue_branch`].
#[derive(Debug, Clone, Copy)]
pub struct ContinuationConfig {
    pub nq: usize,
    pub np: usize,
    pub steps: usize,
    /// Initial arclength step.
    pub ds0: f64,
    pub ds_max: f64,
    pub ds_min: f64,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    /// Stop once `|amplitude|` reaches this value, if set.
    pub target_amplitude: Option<f64>,
    /// Follow the mirror branch (negated initial tangent).
    pub negate_tangent: bool,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            nq: 32,
            np: 16,
            steps: 20,
            ds0: 1e-3,
            ds_max: 0.02,
            ds_min: 1e-9,
            newton_tol: 5e-12,
            max_newton_iter: 25,
            target_amplitude: None,
            negate_tangent: false,
        }
    }
}

/// Nonlinear residual of a state on its own grid: the interior component on
/// every node and the top-boundary component per `q`-node.
pub fn residual_g(
    params: &ModelParams,
    alpha: f64,
    h: &Field2D,
) -> Result<(Field2D, Vec<f64>)> {
    StateVector { h: h.clone(), alpha }.validate()?;
    let d = HDerivs {
        h: h.values.clone(),
        hq: h.d_q()?.values,
        hp: h.d_p()?.values,
        hqq: h.d_qq()?.values,
        hqp: h.d_qp()?.values,
        hpp: h.d_pp()?.values,
    };
    let g1 = operator::residual_interior(&d);
    let lambda = params::lambda_of(params, alpha);
    let top_i = h.grid.np - 1;
    let g2: Vec<f64> = (0..h.grid.nq)
        .map(|j| {
            operator::residual_top(
                d.h[(j, top_i)],
                d.hq[(j, top_i)],
                d.hp[(j, top_i)],
                lambda,
                alpha,
                params.p0sq,
            )
        })
        .collect();
    Ok((Field2D::new(h.grid.clone(), g1, Parity::Even)?, g2))
}

/// Half-grid engine for the even subspace.
pub(crate) struct EvenEngine {
    pub params: ModelParams,
    pub nq: usize,
    pub np: usize,
    /// Half-grid nodes `q_0..q_J`, `J = nq/2`.
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    dp: DMatrix<f64>,
    dpp: DMatrix<f64>,
    /// Even-to-odd first `q`-derivative on the half grid.
    dq_eo: DMatrix<f64>,
    /// Even-to-even second `q`-derivative on the half grid.
    dqq_e: DMatrix<f64>,
    /// Cosine analysis matrix (values -> cosine coefficients).
    cinv: DMatrix<f64>,
    /// Quadrature weights of the half grid (interior columns doubled).
    wq: Vec<f64>,
    wp: Vec<f64>,
    /// Trivial solution on the half grid.
    pub h_trivial: DMatrix<f64>,
}

impl EvenEngine {
    pub fn new(params: ModelParams, nq: usize, np: usize) -> Result<Self> {
        if nq < 8 || nq % 2 != 0 || np < 6 {
            return Err(Error::Grid(format!(
                "continuation grid needs even nq >= 8 and np >= 6, got {nq} x {np}"
            )));
        }
        let jmax = nq / 2;
        let q: Vec<f64> = (0..=jmax).map(|j| 2.0 * PI * j as f64 / nq as f64).collect();
        let (x, dx) = crate::fields::chebyshev_diff_matrix(np - 1);
        let perm: Vec<usize> = (0..np).rev().collect();
        let p: Vec<f64> = perm.iter().map(|&i| (x[i] - 1.0) / 2.0).collect();
        let mut dp = DMatrix::zeros(np, np);
        for (r, &i) in perm.iter().enumerate() {
            for (c, &j) in perm.iter().enumerate() {
                dp[(r, c)] = 2.0 * dx[(i, j)];
            }
        }
        let mut dpp = &dp * &dp;
        crate::fields::enforce_zero_row_sums(&mut dpp);
        let m = jmax + 1;
        let cmat = DMatrix::from_fn(m, m, |j, k| (k as f64 * q[j]).cos());
        let smat = DMatrix::from_fn(m, m, |j, k| (k as f64 * q[j]).sin());
        let cinv = cmat
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("cosine analysis matrix is singular".into()))?;
        let mut dq_eo = {
            let diag = DMatrix::from_fn(m, m, |r, c| if r == c { -(r as f64) } else { 0.0 });
            &smat * diag * &cinv
        };
        crate::fields::enforce_zero_row_sums(&mut dq_eo);
        let mut dqq_e = {
            let diag =
                DMatrix::from_fn(m, m, |r, c| if r == c { -((r * r) as f64) } else { 0.0 });
            &cmat * diag * &cinv
        };
        crate::fields::enforce_zero_row_sums(&mut dqq_e);
        let mut wq = vec![2.0 * PI / nq as f64; m];
        for w in wq.iter_mut().take(jmax).skip(1) {
            *w *= 2.0;
        }
        let wcc = crate::fields::clenshaw_curtis_weights(np - 1);
        let wp: Vec<f64> = perm.iter().map(|&i| wcc[i] * 0.5).collect();
        let g = params.gamma;
        let h_trivial = DMatrix::from_fn(m, np, |_, i| params::trivial_h(g, p[i]));
        Ok(Self {
            params,
            nq,
            np,
            q,
            p,
            dp,
            dpp,
            dq_eo,
            dqq_e,
            cinv,
            wq,
            wp,
            h_trivial,
        })
    }

    fn rows(&self) -> usize {
        self.nq / 2 + 1
    }

    fn dofs(&self) -> usize {
        self.rows() * self.np
    }

    /// Normalized null mode `h*/Chat` on the half grid.
    pub fn hstar_hat(&self) -> DMatrix<f64> {
        let g = self.params.gamma;
        let chat = params::c_hat(g);
        DMatrix::from_fn(self.rows(), self.np, |j, i| {
            params::null_mode(g, self.q[j], self.p[i]) / chat
        })
    }

    fn derivs(&self, h: &DMatrix<f64>) -> HDerivs {
        let hp = h * self.dp.transpose();
        HDerivs {
            h: h.clone(),
            hq: &self.dq_eo * h,
            hqq: &self.dqq_e * h,
            hqp: &self.dq_eo * &hp,
            hpp: h * self.dpp.transpose(),
            hp,
        }
    }

    pub fn admissible(&self, h: &DMatrix<f64>) -> bool {
        let hp = h * self.dp.transpose();
        h.iter().zip(hp.iter()).all(|(hv, hpv)| (hv + 1.0) * hpv > 0.0)
    }

    /// Stacked residual: bottom Dirichlet, interior rows, top boundary row.
    pub fn residual(&self, h: &DMatrix<f64>, alpha: f64) -> DVector<f64> {
        let d = self.derivs(h);
        let g1 = operator::residual_interior(&d);
        let lambda = params::lambda_of(&self.params, alpha);
        let rows = self.rows();
        let np = self.np;
        let mut r = DVector::zeros(self.dofs());
        for j in 0..rows {
            r[j * np] = h[(j, 0)];
            for i in 1..np - 1 {
                r[j * np + i] = g1[(j, i)];
            }
            r[j * np + np - 1] = operator::residual_top(
                d.h[(j, np - 1)],
                d.hq[(j, np - 1)],
                d.hp[(j, np - 1)],
                lambda,
                alpha,
                self.params.p0sq,
            );
        }
        r
    }

    /// Dense Jacobian of [`EvenEngine::residual`] with respect to `h`.
    pub fn jacobian(&self, h: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
        let d = self.derivs(h);
        let c = operator::interior_coeffs(&d);
        let rows = self.rows();
        let np = self.np;
        let n = self.dofs();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..rows {
            // bottom Dirichlet row
            jac[(j * np, j * np)] = 1.0;
            for i in 1..np - 1 {
                let r = j * np + i;
                // terms acting in p only (block-diagonal in q)
                for l in 0..np {
                    jac[(r, j * np + l)] += c.c_pp[(j, i)] * self.dpp[(i, l)]
                        + c.c_p[(j, i)] * self.dp[(i, l)];
                }
                jac[(r, j * np + i)] += c.c_0[(j, i)];
                // terms acting in q (dense over half-grid columns)
                for m in 0..rows {
                    let aqq = self.dqq_e[(j, m)];
                    let aq = self.dq_eo[(j, m)];
                    jac[(r, m * np + i)] += c.c_qq[(j, i)] * aqq + c.c_q[(j, i)] * aq;
                    if c.c_qp[(j, i)] != 0.0 {
                        for l in 0..np {
                            jac[(r, m * np + l)] += c.c_qp[(j, i)] * aq * self.dp[(i, l)];
                        }
                    }
                }
            }
            // top boundary row
            let lambda = params::lambda_of(&self.params, alpha);
            let i = np - 1;
            let (d_p, d_q, d_0) = operator::top_coeffs(
                d.h[(j, i)],
                d.hq[(j, i)],
                d.hp[(j, i)],
                lambda,
                alpha,
                self.params.p0sq,
            );
            let r = j * np + i;
            for l in 0..np {
                jac[(r, j * np + l)] += d_p * self.dp[(i, l)];
            }
            for m in 0..rows {
                jac[(r, m * np + i)] += d_q * self.dq_eo[(j, m)];
            }
            jac[(r, r)] += d_0;
        }
        jac
    }

    /// Derivative of the stacked residual with respect to `alpha`.
    pub fn dres_dalpha(&self, h: &DMatrix<f64>) -> DVector<f64> {
        let hp = h * self.dp.transpose();
        let rows = self.rows();
        let np = self.np;
        let e_gamma = self.params.gamma.exp();
        let mut out = DVector::zeros(self.dofs());
        for j in 0..rows {
            out[j * np + np - 1] = operator::top_dalpha(h[(j, np - 1)], hp[(j, np - 1)], e_gamma);
        }
        out
    }

    /// Signed `cos q` coefficient of the top trace of `h - H`.
    pub fn amplitude(&self, h: &DMatrix<f64>) -> f64 {
        let np = self.np;
        (0..self.rows())
            .map(|m| self.cinv[(1, m)] * (h[(m, np - 1)] - self.h_trivial[(m, np - 1)]))
            .sum()
    }

    /// Row of the (linear) amplitude functional.
    fn amplitude_row(&self) -> DVector<f64> {
        let np = self.np;
        let mut row = DVector::zeros(self.dofs());
        for m in 0..self.rows() {
            row[m * np + np - 1] = self.cinv[(1, m)];
        }
        row
    }

    /// Channel-quadrature inner product of two half-grid fields.
    pub fn inner(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.rows() {
            for i in 0..self.np {
                acc += self.wq[j] * self.wp[i] * a[(j, i)] * b[(j, i)];
            }
        }
        acc
    }

    /// Mirror a half-grid field to a full-grid even [`Field2D`].
    pub fn to_field(&self, h: &DMatrix<f64>, grid: Arc<Grid>) -> Result<Field2D> {
        if grid.nq != self.nq || grid.np != self.np {
            return Err(Error::Grid("engine/grid size mismatch".into()));
        }
        let mut values = DMatrix::zeros(self.nq, self.np);
        for j in 0..self.nq {
            let jh = if j <= self.nq / 2 { j } else { self.nq - j };
            for i in 0..self.np {
                values[(j, i)] = h[(jh, i)];
            }
        }
        Field2D::new(grid, values, Parity::Even)
    }

    /// Restrict a full-grid even field to the half grid.
    pub fn from_field(&self, f: &Field2D) -> Result<DMatrix<f64>> {
        if f.grid.nq != self.nq || f.grid.np != self.np {
            return Err(Error::Grid("engine/grid size mismatch".into()));
        }
        Ok(DMatrix::from_fn(self.rows(), self.np, |j, i| f.values[(j, i)]))
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton iteration on the half grid; shared by the public solver and tests.
pub(crate) fn newton_half(
    eng: &EvenEngine,
    h0: &DMatrix<f64>,
    alpha0: f64,
    constraint: NewtonConstraint,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let mut h = h0.clone();
    let mut alpha = alpha0;
    let n = eng.dofs();
    let mut best = f64::INFINITY;
    let mut growth_streak = 0usize;
    for _ in 0..max_iter {
        let r = eng.residual(&h, alpha);
        let extra = match constraint {
            NewtonConstraint::FixedAlpha => 0.0,
            NewtonConstraint::FixedAmplitude(a) => eng.amplitude(&h) - a,
        };
        let norm = max_abs(&r).max(extra.abs());
        if norm < tol {
            return Ok((h, alpha, norm));
        }
        if norm > best {
            growth_streak += 1;
            if growth_streak >= 5 {
                return Err(Error::NoConvergence(format!(
                    "residual grew over 5 consecutive Newton steps (now {norm:.3e})"
                )));
            }
        } else {
            best = norm;
            growth_streak = 0;
        }
        let jac = eng.jacobian(&h, alpha);
        let (dh, dalpha) = match constraint {
            NewtonConstraint::FixedAlpha => {
                let lu = jac.lu();
                let step = lu
                    .solve(&(-&r))
                    .ok_or_else(|| Error::NoConvergence("singular Jacobian".into()))?;
                (step, 0.0)
            }
            NewtonConstraint::FixedAmplitude(_) => {
                let mut m = DMatrix::zeros(n + 1, n + 1);
                m.view_mut((0, 0), (n, n)).copy_from(&jac);
                let da = eng.dres_dalpha(&h);
                for i in 0..n {
                    m[(i, n)] = da[i];
                }
                let arow = eng.amplitude_row();
                for i in 0..n {
                    m[(n, i)] = arow[i];
                }
                let mut rhs = DVector::zeros(n + 1);
                for i in 0..n {
                    rhs[i] = -r[i];
                }
                rhs[n] = -extra;
                let lu = m.lu();
                let step = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::NoConvergence("singular bordered Jacobian".into()))?;
                (step.rows(0, n).into_owned(), step[n])
            }
        };
        // damped update: halve on inadmissible iterates
        let mut lam = 1.0;
        let mut halvings = 0;
        loop {
            let mut trial = h.clone();
            for j in 0..eng.rows() {
                for i in 0..eng.np {
                    trial[(j, i)] += lam * dh[j * eng.np + i];
                }
            }
            if eng.admissible(&trial) {
                h = trial;
                alpha += lam * dalpha;
                break;
            }
            halvings += 1;
            if halvings > 30 {
                return Err(Error::Inadmissible(
                    "Newton step stays inadmissible after 30 halvings".into(),
                ));
            }
            lam *= 0.5;
        }
    }
    let final_norm = max_abs(&eng.residual(&h, alpha));
    if final_norm < tol {
        Ok((h, alpha, final_norm))
    } else {
        Err(Error::NoConvergence(format!(
            "residual {final_norm:.3e} after {max_iter} iterations (tol {tol:.1e})"
        )))
    }
}

/// Solve the nonlinear system by Newton iteration from `initial`.
///
/// With [`NewtonConstraint::FixedAlpha`] the parameter stays at
/// `initial.alpha`; with [`NewtonConstraint::FixedAmplitude`] the parameter is
/// free and the `cos q` amplitude of the top trace is pinned.
pub fn newton_solve(
    initial: &StateVector,
    params: &ModelParams,
    constraint: NewtonConstraint,
    config: &ContinuationConfig,
) -> Result<StateVector> {
    initial.validate()?;
    let grid = initial.h.grid.clone();
    let eng = EvenEngine::new(*params, grid.nq, grid.np)?;
    let h0 = eng.from_field(&initial.h)?;
    let (h, alpha, _norm) = newton_half(
        &eng,
        &h0,
        initial.alpha,
        constraint,
        config.newton_tol,
        config.max_newton_iter,
    )?;
    Ok(StateVector { h: eng.to_field(&h, grid)?, alpha })
}

/// Pseudo-arclength continuation from the bifurcation point `(alpha_c, H)`.
///
/// The first step moves along `(dh, dalpha) = (ds * hstar_hat, 0)`; afterwards
/// the tangent is the normalized secant. The step is halved on corrector
/// failure and doubled after three easy successes, capped at `ds_max`. On
/// step-size exhaustion the branch collected so far is returned with the
/// `truncated` flag set.
pub fn continue_branch(params: &ModelParams, config: &ContinuationConfig) -> Result<Branch> {
    if params.p0sq <= 0.0 {
        return Err(Error::InvalidParams("continuation needs p0sq > 0".into()));
    }
    let eng = EvenEngine::new(*params, config.nq, config.np)?;
    let grid = crate::fields::make_grid(config.nq, config.np)?;
    let alpha_c = params::alpha_c(params);
    let hstar = eng.hstar_hat();
    let tangent_sign = if config.negate_tangent { -1.0 } else { 1.0 };

    let mut h = eng.h_trivial.clone();
    let mut alpha = alpha_c;
    let mut tangent_h = hstar.clone() * tangent_sign;
    let mut tangent_a = 0.0;
    // amplitude carried by the analytic first tangent, for the branch-switch guard
    let switch_amp = eng.amplitude(&(eng.h_trivial.clone() + &tangent_h));

    let mut points = vec![BranchPoint {
        alpha,
        h: eng.to_field(&h, grid.clone())?,
        amplitude: 0.0,
        arclength: 0.0,
        residual_norm: max_abs(&eng.residual(&h, alpha)),
    }];
    let mut arclength = 0.0;
    let mut ds = config.ds0.min(config.ds_max);
    let mut easy = 0usize;
    let mut truncated = false;

    for step in 0..config.steps {
        let mut accepted = None;
        while ds >= config.ds_min {
            match correct_step(&eng, &h, alpha, &tangent_h, tangent_a, ds, config) {
                Ok((hc, ac, norm)) => {
                    // on the branch-switch step, reject correctors that slid onto a
                    // different solution family (wrong cos q content)
                    let ok_switch = if step == 0 {
                        let a = eng.amplitude(&hc);
                        (a - ds * switch_amp).abs() <= 0.5 * ds * switch_amp.abs()
                    } else {
                        true
                    };
                    if ok_switch {
                        accepted = Some((hc, ac, norm));
                        break;
                    }
                }
                Err(_) => {}
            }
            ds *= 0.5;
            easy = 0;
        }
        let Some((hc, ac, norm)) = accepted else {
            truncated = true;
            break;
        };
        let dh = &hc - &h;
        let da = ac - alpha;
        let len = (eng.inner(&dh, &dh) + da * da).sqrt();
        tangent_h = dh / len;
        tangent_a = da / len;
        h = hc;
        alpha = ac;
        arclength += len;
        points.push(BranchPoint {
            alpha,
            h: eng.to_field(&h, grid.clone())?,
            amplitude: eng.amplitude(&h),
            arclength,
            residual_norm: norm,
        });
        if let Some(target) = config.target_amplitude {
            if eng.amplitude(&h).abs() >= target.abs() {
                break;
            }
        }
        easy += 1;
        if easy >= 3 && ds < config.ds_max {
            ds = (2.0 * ds).min(config.ds_max);
            easy = 0;
        }
    }
    Ok(Branch { alpha_c, points, truncated })
}

/// One bordered corrector solve from the tangent predictor.
fn correct_step(
    eng: &EvenEngine,
    h_prev: &DMatrix<f64>,
    a_prev: f64,
    tangent_h: &DMatrix<f64>,
    tangent_a: f64,
    ds: f64,
    config: &ContinuationConfig,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let n = eng.dofs();
    let mut h = h_prev + tangent_h * ds;
    let mut alpha = a_prev + tangent_a * ds;
    if !eng.admissible(&h) {
        return Err(Error::Inadmissible("predictor left the admissible set".into()));
    }
    let mut best = f64::INFINITY;
    for _ in 0..config.max_newton_iter {
        let r = eng.residual(&h, alpha);
        let dh0 = &h - h_prev;
        let arc = eng.inner(tangent_h, &dh0) + tangent_a * (alpha - a_prev) - ds;
        let norm = max_abs(&r).max(arc.abs());
        if norm < config.newton_tol {
            return Ok((h, alpha, max_abs(&r)));
        }
        if norm > 1e3 * best.max(1e-8) {
            return Err(Error::NoConvergence("corrector diverging".into()));
        }
        best = best.min(norm);
        let jac = eng.jacobian(&h, alpha);
        let da_col = eng.dres_dalpha(&h);
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&jac);
        for i in 0..n {
            m[(i, n)] = da_col[i];
        }
        // weighted tangent row (the arclength functional uses the channel inner product)
        for j in 0..eng.rows() {
            for i in 0..eng.np {
                m[(n, j * eng.np + i)] = eng.wq[j] * eng.wp[i] * tangent_h[(j, i)];
            }
        }
        m[(n, n)] = tangent_a;
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -r[i];
        }
        rhs[n] = -arc;
        let step = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NoConvergence("singular bordered system".into()))?;
        for j in 0..eng.rows() {
            for i in 0..eng.np {
                h[(j, i)] += step[j * eng.np + i];
            }
        }
        alpha += step[n];
        if !eng.admissible(&h) {
            return Err(Error::Inadmissible("corrector left the admissible set".into()));
        }
    }
    Err(Error::NoConvergence("corrector did not converge".into()))
}

/// Result of a pitchfork-direction fit.
#[derive(Debug, Clone, Copy)]
pub struct DirectionFit {
    pub class: BifurcationClass,
    /// Least-squares constant in `alpha - alpha_c = c * amplitude^2`.
    pub c: f64,
    /// Relative fit residual.
    pub residual: f64,
    pub points_used: usize,
}

/// Fit `alpha - alpha_c = c * amplitude^2` over the nontrivial branch points
/// and classify the pitchfork direction by the sign of `c`.
///
/// Needs at least 5 points with `|amplitude| > amp_floor`; pass
/// `10 * newton_tol` for the floor to match the branch tolerance.
pub fn detect_direction(branch: &[BranchPoint], alpha_c: f64, amp_floor: f64) -> Result<DirectionFit> {
    let pts: Vec<&BranchPoint> =
        branch.iter().filter(|p| p.amplitude.abs() > amp_floor).collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 nontrivial points, have {}",
            pts.len()
        )));
    }
    let num: f64 = pts.iter().map(|p| p.amplitude.powi(2) * (p.alpha - alpha_c)).sum();
    let den: f64 = pts.iter().map(|p| p.amplitude.powi(4)).sum();
    let dal2: f64 = pts.iter().map(|p| (p.alpha - alpha_c).powi(2)).sum();
    if den <= 0.0 || dal2 <= 0.0 {
        return Ok(DirectionFit {
            class: BifurcationClass::Degenerate,
            c: 0.0,
            residual: f64::NAN,
            points_used: pts.len(),
        });
    }
    let c = num / den;
    let err2: f64 = pts
        .iter()
        .map(|p| (p.alpha - alpha_c - c * p.amplitude.powi(2)).powi(2))
        .sum();
    let residual = (err2 / dal2).sqrt();
    // a fit where the alpha excursion is pure noise is degenerate, not directional
    let amp_max = pts.iter().map(|p| p.amplitude.abs()).fold(0.0f64, f64::max);
    let class = if c.abs() * amp_max * amp_max < 1e4 * f64::EPSILON * alpha_c.abs() {
        BifurcationClass::Degenerate
    } else if c > 0.0 {
        BifurcationClass::Supercritical
    } else {
        BifurcationClass::Subcritical
    };
    Ok(DirectionFit { class, c, residual, points_used: pts.len() })
}

/// The trivial state on a grid.
pub fn trivial_state(params: &ModelParams, grid: Arc<Grid>, alpha: f64) -> StateVector {
    StateVector { h: crate::linops::trivial_field(params, grid), alpha }
}
