//! Linearized operators around the radial flow: per-wavenumber eigensolvers,
//! operator application on fields, the numerical critical value, Morse indices
//! and the range/orthogonality characterization.
//!
//! The per-wavenumber problem is the divergence-form pencil
//! `d/dp[(H+1)^{-2} M'] + gamma^2 (1-k^2) (H+1)^{-2} M = sigma (H+1)^{-4} M`
//! with `M(-1) = 0` and the homogeneous Robin condition
//! `p0^2/gamma M'(0) - beta(alpha) M(0) = 0`. Its spectrum equals that of the
//! strong-form linearized interior operator restricted to the kernel of the
//! linearized boundary operator, which is what the Morse index counts.

use crate::fields::{Field2D, Grid, Parity};
use crate::operator;
use crate::params::{self, ModelParams};
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One per-wavenumber eigenproblem.
#[derive(Debug, Clone, Copy)]
pub struct OdeEigenProblem {
    pub wavenumber: usize,
    pub params: ModelParams,
    pub alpha: f64,
    /// Number of Chebyshev-Lobatto nodes on `[-1, 0]`.
    pub np: usize,
}

/// Eigenvalues per wavenumber plus the Morse index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub alpha: f64,
    pub kmax: usize,
    pub per_k: Vec<PerWavenumber>,
    pub morse_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerWavenumber {
    pub k: usize,
    pub eigenvalues: Vec<f64>,
}

/// Ascending Chebyshev-Lobatto nodes on `[-1, 0]`; the node set used by
/// [`ode_eigs`] and [`rayleigh_sigma1`] at resolution `np`.
pub fn p_nodes(np: usize) -> Vec<f64> {
    let (x, _) = crate::fields::chebyshev_diff_matrix(np - 1);
    (0..np).rev().map(|i| (x[i] - 1.0) / 2.0).collect()
}

struct PGrid {
    p: Vec<f64>,
    dp: DMatrix<f64>,
    wp: Vec<f64>,
}

fn p_grid(np: usize) -> PGrid {
    let (x, dx) = crate::fields::chebyshev_diff_matrix(np - 1);
    let perm: Vec<usize> = (0..np).rev().collect();
    let p: Vec<f64> = perm.iter().map(|&i| (x[i] - 1.0) / 2.0).collect();
    let mut dp = DMatrix::zeros(np, np);
    for (r, &i) in perm.iter().enumerate() {
        for (c, &j) in perm.iter().enumerate() {
            dp[(r, c)] = 2.0 * dx[(i, j)];
        }
    }
    let wcc = crate::fields::clenshaw_curtis_weights(np - 1);
    let wp: Vec<f64> = perm.iter().map(|&i| wcc[i] * 0.5).collect();
    PGrid { p, dp, wp }
}

/// Linearization at the trivial solution, written in the self-adjoint-friendly
/// form: interior `(1+H)^3 [(1+H)^{-1} f]_pp + gamma^2 (1+H)^2 f_qq`, top
/// `2 e^gamma [p0^2/gamma f_p - beta(alpha) f]` at `p = 0`.
pub fn apply_linearized_trivial(
    params: &ModelParams,
    alpha: f64,
    f: &Field2D,
) -> Result<(Field2D, Vec<f64>)> {
    let grid = &f.grid;
    if grid.np < 4 {
        return Err(Error::Grid("np < 4 is too small for the linearization".into()));
    }
    let g = params.gamma;
    let hp1 = |p: f64| (g * (p + 1.0)).exp();
    // interior: (1+H)^3 [(1+H)^{-1} f]_pp + g^2 (1+H)^2 f_qq
    let weighted = Field2D::from_fn(grid.clone(), f.parity, |_, p| 1.0 / hp1(p));
    let mut inner = f.clone();
    inner.values.component_mul_assign(&weighted.values);
    let inner_pp = inner.d_pp()?;
    let f_qq = f.d_qq()?;
    let mut interior = DMatrix::zeros(grid.nq, grid.np);
    for j in 0..grid.nq {
        for i in 0..grid.np {
            let w = hp1(grid.p[i]);
            interior[(j, i)] = w.powi(3) * inner_pp.values[(j, i)] + g * g * w * w * f_qq.values[(j, i)];
        }
    }
    let beta = params::beta(params, alpha);
    let f_p = f.d_p()?;
    let scale = 2.0 * g.exp();
    let top: Vec<f64> = (0..grid.nq)
        .map(|j| {
            scale
                * (params.p0sq / g * f_p.values[(j, grid.np - 1)]
                    - beta * f.values[(j, grid.np - 1)])
        })
        .collect();
    Ok((Field2D::new(grid.clone(), interior, f.parity)?, top))
}

/// Directional derivative of the nonlinear residual at an arbitrary state `h`,
/// applied to `f`. At `h = H` this agrees with [`apply_linearized_trivial`].
pub fn apply_linearized_general(
    params: &ModelParams,
    alpha: f64,
    h: &Field2D,
    f: &Field2D,
) -> Result<(Field2D, Vec<f64>)> {
    let grid = &h.grid;
    let d = operator::HDerivs {
        h: h.values.clone(),
        hq: h.d_q()?.values,
        hp: h.d_p()?.values,
        hqq: h.d_qq()?.values,
        hqp: h.d_qp()?.values,
        hpp: h.d_pp()?.values,
    };
    let c = operator::interior_coeffs(&d);
    let fq = f.d_q()?.values;
    let fp = f.d_p()?.values;
    let fqq = f.d_qq()?.values;
    let fqp = f.d_qp()?.values;
    let fpp = f.d_pp()?.values;
    let mut interior = DMatrix::zeros(grid.nq, grid.np);
    for idx in 0..interior.len() {
        interior[idx] = c.c_qq[idx] * fqq[idx]
            + c.c_qp[idx] * fqp[idx]
            + c.c_pp[idx] * fpp[idx]
            + c.c_p[idx] * fp[idx]
            + c.c_q[idx] * fq[idx]
            + c.c_0[idx] * f.values[idx];
    }
    let lambda = params::lambda_of(params, alpha);
    let top_i = grid.np - 1;
    let top: Vec<f64> = (0..grid.nq)
        .map(|j| {
            let (d_p, d_q, d_0) = operator::top_coeffs(
                h.values[(j, top_i)],
                d.hq[(j, top_i)],
                d.hp[(j, top_i)],
                lambda,
                alpha,
                params.p0sq,
            );
            d_p * fp[(j, top_i)] + d_q * fq[(j, top_i)] + d_0 * f.values[(j, top_i)]
        })
        .collect();
    let parity = f.parity;
    Ok((Field2D::new(grid.clone(), interior, parity)?, top))
}

/// Assemble the reduced standard eigenproblem matrix for one wavenumber.
///
/// Boundary conditions are imposed by row replacement and then eliminated:
/// the two boundary values are solved from the Dirichlet/Robin rows in terms
/// of the interior values, giving an `(np-2) x (np-2)` matrix whose spectrum
/// is that of the pencil without the spurious infinite modes.
fn reduced_matrix(prob: &OdeEigenProblem) -> Result<DMatrix<f64>> {
    let npn = prob.np;
    if npn < 5 {
        return Err(Error::Grid("np < 5 is too small for the eigensolver".into()));
    }
    let g = prob.params.gamma;
    let pg = p_grid(npn);
    let k2 = (prob.wavenumber * prob.wavenumber) as f64;
    // divergence form: diag(w2') D + diag(w2) D^2 + g^2 (1-k^2) diag(w2), w2 = (H+1)^{-2}
    let mut a = DMatrix::zeros(npn, npn);
    let d2 = &pg.dp * &pg.dp;
    for r in 0..npn {
        let w2 = (-2.0 * g * (pg.p[r] + 1.0)).exp();
        for cidx in 0..npn {
            a[(r, cidx)] = -2.0 * g * w2 * pg.dp[(r, cidx)] + w2 * d2[(r, cidx)];
        }
        a[(r, r)] += g * g * (1.0 - k2) * w2;
    }
    let b_diag: Vec<f64> = pg.p.iter().map(|&p| (-4.0 * g * (p + 1.0)).exp()).collect();
    let beta = params::beta(&prob.params, prob.alpha);
    // boundary rows: Dirichlet at p = -1 (row 0), Robin at p = 0 (row npn-1)
    for cidx in 0..npn {
        a[(0, cidx)] = if cidx == 0 { 1.0 } else { 0.0 };
        a[(npn - 1, cidx)] = prob.params.p0sq / g * pg.dp[(npn - 1, cidx)];
    }
    a[(npn - 1, npn - 1)] -= beta;
    // eliminate the two boundary unknowns
    let bset = [0usize, npn - 1];
    let iset: Vec<usize> = (1..npn - 1).collect();
    let mut cbb = DMatrix::zeros(2, 2);
    let mut cbi = DMatrix::zeros(2, npn - 2);
    for (r, &br) in bset.iter().enumerate() {
        for (cc, &bc) in bset.iter().enumerate() {
            cbb[(r, cc)] = a[(br, bc)];
        }
        for (cc, &ic) in iset.iter().enumerate() {
            cbi[(r, cc)] = a[(br, ic)];
        }
    }
    let lu = cbb.lu();
    let x = lu
        .solve(&(-cbi))
        .ok_or_else(|| Error::Numerical("boundary rows are singular".into()))?;
    let n_i = npn - 2;
    let mut m = DMatrix::zeros(n_i, n_i);
    for (r, &ir) in iset.iter().enumerate() {
        for (cc, &ic) in iset.iter().enumerate() {
            let mut v = a[(ir, ic)];
            for (bb, &bc) in bset.iter().enumerate() {
                v += a[(ir, bc)] * x[(bb, cc)];
            }
            m[(r, cc)] = v / b_diag[ir];
        }
    }
    Ok(m)
}

/// Eigenvalues of the per-wavenumber problem, ascending.
///
/// Imaginary parts below `1e-10 * max(1, spectral radius)` are discarded;
/// anything larger signals under-resolution and errors.
pub fn ode_eigs(prob: &OdeEigenProblem) -> Result<Vec<f64>> {
    let m = reduced_matrix(prob)?;
    let eigs = m.complex_eigenvalues();
    let radius = eigs.iter().fold(1.0f64, |r, z| r.max(z.norm()));
    let mut out = Vec::with_capacity(eigs.len());
    for z in eigs.iter() {
        if z.im.abs() > 1e-10 * radius {
            return Err(Error::Numerical(format!(
                "non-real eigenvalue {z} of the k={} problem (under-resolved?)",
                prob.wavenumber
            )));
        }
        out.push(z.re);
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// The distinguished eigenvalue `sigma_1(alpha)`: the top of the `k = 1`
/// spectrum. By the variational form it is the one that crosses zero at
/// `alpha_c`; near the crossing it is also the eigenvalue closest to zero,
/// but far above `alpha_c` it outgrows the rest of the spectrum, so the
/// maximum is the robust selector over a wide bracket.
pub fn sigma1(params: &ModelParams, alpha: f64, np: usize) -> Result<f64> {
    let eigs = ode_eigs(&OdeEigenProblem { wavenumber: 1, params: *params, alpha, np })?;
    eigs.into_iter()
        .last()
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))
}

/// Root of `alpha -> sigma_1(alpha)` inside `bracket`, to absolute tolerance 1e-10.
pub fn find_alpha_c_numeric(params: &ModelParams, bracket: (f64, f64), np: usize) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if lo >= hi {
        return Err(Error::Bracket(format!("empty bracket ({lo}, {hi})")));
    }
    let mut flo = sigma1(params, lo, np)?;
    let fhi = sigma1(params, hi, np)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!(
            "sigma_1 does not change sign over ({lo}, {hi}): {flo} vs {fhi}"
        )));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let fm = sigma1(params, mid, np)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rayleigh quotient of the `k = 1` variational form for a test function given
/// on the [`p_nodes`] of resolution `test_m.len()`; an upper bound for
/// `-sigma_1(alpha)` up to quadrature error.
pub fn rayleigh_sigma1(params: &ModelParams, alpha: f64, test_m: &[f64]) -> Result<f64> {
    let npn = test_m.len();
    if npn < 4 {
        return Err(Error::Grid("test function needs at least 4 nodes".into()));
    }
    if test_m[0].abs() > 1e-12 {
        return Err(Error::InvalidParams("test function must vanish at p = -1".into()));
    }
    let g = params.gamma;
    let pg = p_grid(npn);
    let m = nalgebra::DVector::from_column_slice(test_m);
    let mp = &pg.dp * &m;
    let beta = params::beta(params, alpha);
    let mut num = -beta * g * (-2.0 * g).exp() * test_m[npn - 1] * test_m[npn - 1] / params.p0sq;
    let mut den = 0.0;
    for i in 0..npn {
        let w2 = (-2.0 * g * (pg.p[i] + 1.0)).exp();
        let w4 = w2 * w2;
        num += pg.wp[i] * w2 * mp[i] * mp[i];
        den += pg.wp[i] * w4 * m[i] * m[i];
    }
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::Numerical("zero or invalid denominator in the quotient".into()));
    }
    Ok(num / den)
}

fn positive_count(eigs: &[f64], crossing_tol: f64) -> Result<usize> {
    if eigs.iter().any(|e| e.abs() <= crossing_tol) {
        return Err(Error::AtCrossing(format!(
            "an eigenvalue lies within {crossing_tol} of zero"
        )));
    }
    Ok(eigs.iter().filter(|e| **e > 0.0).count())
}

/// Morse index: the number of positive eigenvalues of the linearized interior
/// operator under the homogeneous linearized boundary condition, summed over
/// wavenumbers `0..=kmax`.
///
/// Errors if any eigenvalue sits within `1e-8` of zero (an eigenvalue
/// crossing) or if the `k = kmax` block still has a nonnegative eigenvalue
/// (truncation too small).
pub fn morse_index(params: &ModelParams, alpha: f64, kmax: usize, np: usize) -> Result<usize> {
    let per_k = eigs_up_to(params, alpha, kmax, np)?;
    let mut total = 0;
    for pk in &per_k {
        total += positive_count(&pk.eigenvalues, 1e-8)?;
    }
    let tail = &per_k[kmax].eigenvalues;
    if tail.iter().any(|e| *e >= 0.0) {
        return Err(Error::Numerical(format!(
            "kmax = {kmax} too small: the tail block still has a nonnegative eigenvalue"
        )));
    }
    Ok(total)
}

fn eigs_up_to(
    params: &ModelParams,
    alpha: f64,
    kmax: usize,
    np: usize,
) -> Result<Vec<PerWavenumber>> {
    let solve = |k: usize| -> Result<PerWavenumber> {
        let eigenvalues = ode_eigs(&OdeEigenProblem { wavenumber: k, params: *params, alpha, np })?;
        Ok(PerWavenumber { k, eigenvalues })
    };
    #[cfg(feature = "parallel")]
    {
        (0..=kmax).into_par_iter().map(solve).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..=kmax).map(solve).collect()
    }
}

/// Full spectrum record for serialization.
pub fn spectrum(params: &ModelParams, alpha: f64, kmax: usize, np: usize) -> Result<Spectrum> {
    let per_k = eigs_up_to(params, alpha, kmax, np)?;
    let morse_index = morse_index(params, alpha, kmax, np)?;
    Ok(Spectrum { alpha, kmax, per_k, morse_index })
}

/// Quadrature of the range characterization:
/// `int_Omega u (1+H)^{-4} h* - 1/2 int_T (1+H)^{-3} (gamma h*/p0^2) b`.
/// Vanishes iff `(u, b)` lies in the range of the linearization at `alpha_c`.
pub fn orthogonality_residual(params: &ModelParams, u: &Field2D, b: &[f64]) -> Result<f64> {
    if b.len() != u.grid.nq {
        return Err(Error::Grid("boundary data length must match nq".into()));
    }
    let g = params.gamma;
    let grid = &u.grid;
    let mut acc = 0.0;
    for j in 0..grid.nq {
        for i in 0..grid.np {
            let w4 = (-4.0 * g * (grid.p[i] + 1.0)).exp();
            acc += grid.wq[j]
                * grid.wp[i]
                * u.values[(j, i)]
                * w4
                * params::null_mode(g, grid.q[j], grid.p[i]);
        }
    }
    let w3 = (-3.0 * g).exp();
    for j in 0..grid.nq {
        let hs_top = params::null_mode(g, grid.q[j], 0.0);
        acc -= 0.5 * grid.wq[j] * w3 * g * hs_top / params.p0sq * b[j];
    }
    Ok(acc)
}

/// Singular values of the stacked per-wavenumber blocks of the discretized
/// linearization at `(alpha, H)`, after normalizing every row to unit length.
///
/// Each block stacks the strong-form interior rows at the non-bottom nodes and
/// the top boundary row, acting on values with the bottom node eliminated.
/// Row normalization makes the `1e-6`-of-operator-norm threshold measure rank
/// structure instead of the collocation row scaling; it does not change the
/// null space. Returns `(values below rel_tol * opnorm, opnorm, smallest few)`.
pub fn near_zero_singular_values(
    params: &ModelParams,
    alpha: f64,
    nq: usize,
    np: usize,
    rel_tol: f64,
) -> Result<(usize, f64, Vec<f64>)> {
    let kmax = nq / 2;
    let blocks: Result<Vec<Vec<f64>>> = {
        let solve = |k: usize| -> Result<Vec<f64>> {
            let m = stacked_block(params, alpha, k, np);
            let svd = m.svd(false, false);
            Ok(svd.singular_values.iter().copied().collect())
        };
        #[cfg(feature = "parallel")]
        {
            (0..=kmax).into_par_iter().map(solve).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..=kmax).map(solve).collect()
        }
    };
    let mut all: Vec<f64> = blocks?.into_iter().flatten().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let opnorm = *all.last().expect("nonempty spectrum");
    let count = all.iter().take_while(|s| **s < rel_tol * opnorm).count();
    let smallest = all.iter().take(5).copied().collect();
    Ok((count, opnorm, smallest))
}

fn stacked_block(params: &ModelParams, alpha: f64, k: usize, npn: usize) -> DMatrix<f64> {
    let g = params.gamma;
    let pg = p_grid(npn);
    let d2 = &pg.dp * &pg.dp;
    let k2 = (k * k) as f64;
    let beta = params::beta(params, alpha);
    // strong form: (1+H)^2 (M'' - 2 g M') + g^2 (1-k^2) (1+H)^2 M, rows 1..np-1,
    // then the Robin row; columns 1..np-1 (Dirichlet bottom value eliminated)
    let mut block = DMatrix::zeros(npn, npn - 1);
    for r in 1..npn {
        let w = (2.0 * g * (pg.p[r] + 1.0)).exp();
        for c in 1..npn {
            block[(r - 1, c - 1)] = w * (d2[(r, c)] - 2.0 * g * pg.dp[(r, c)]);
        }
        block[(r - 1, r - 1)] += g * g * (1.0 - k2) * w;
    }
    for c in 1..npn {
        block[(npn - 1, c - 1)] = 2.0 * g.exp() * params.p0sq / g * pg.dp[(npn - 1, c)];
    }
    block[(npn - 1, npn - 2)] -= 2.0 * g.exp() * beta;
    // unit-length rows
    for r in 0..npn {
        let norm = block.row(r).norm();
        if norm > 0.0 {
            for c in 0..npn - 1 {
                block[(r, c)] /= norm;
            }
        }
    }
    block
}

/// Sample the null mode on a grid as an even field.
pub fn null_mode_field(params: &ModelParams, grid: Arc<Grid>) -> Field2D {
    let g = params.gamma;
    Field2D::from_fn(grid, Parity::Even, |q, p| params::null_mode(g, q, p))
}

/// Sample the trivial solution on a grid (constant in `q`).
pub fn trivial_field(params: &ModelParams, grid: Arc<Grid>) -> Field2D {
    let g = params.gamma;
    Field2D::from_fn(grid, Parity::Even, |_, p| params::trivial_h(g, p))
}
