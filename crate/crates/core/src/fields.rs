//! Discretization of the periodic channel `Omega = [0, 2pi) x [-1, 0]`.
//!
//! `q` runs over a uniform periodic grid (trigonometric collocation), `p` over
//! Chebyshev-Lobatto points mapped to `[-1, 0]` and ordered ascending, so the
//! first `p`-node is the bottom `p = -1` and the last is the top `p = 0`.
//! Quadrature is the trapezoid rule in `q` (exact for trigonometric
//! polynomials) times Clenshaw-Curtis in `p`.

use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Declared symmetry of a field in `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// Tensor grid on the periodic channel, with differentiation matrices and
/// quadrature weights. Immutable after construction; share via [`Arc`].
#[derive(Debug, Clone)]
pub struct Grid {
    pub nq: usize,
    pub np: usize,
    /// Uniform nodes `q_j = 2 pi j / nq`.
    pub q: Vec<f64>,
    /// Chebyshev-Lobatto nodes mapped to `[-1, 0]`, ascending (`p[0] = -1`, `p[np-1] = 0`).
    pub p: Vec<f64>,
    /// Quadrature weights in `q` (all `2 pi / nq`).
    pub wq: Vec<f64>,
    /// Clenshaw-Curtis weights on `[-1, 0]`.
    pub wp: Vec<f64>,
    dq: DMatrix<f64>,
    dqq: DMatrix<f64>,
    dp: DMatrix<f64>,
    dpp: DMatrix<f64>,
}

/// Chebyshev-Lobatto differentiation matrix on `[-1, 1]` for `n + 1` nodes
/// `x_i = cos(i pi / n)` (descending), with the negative-sum diagonal.
pub fn chebyshev_diff_matrix(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let m = n + 1;
    let x: Vec<f64> = (0..m).map(|i| (PI * i as f64 / n as f64).cos()).collect();
    let c = |i: usize| -> f64 {
        let edge = if i == 0 || i == n { 2.0 } else { 1.0 };
        edge * if i % 2 == 0 { 1.0 } else { -1.0 }
    };
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..m {
        let s: f64 = (0..m).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Clenshaw-Curtis quadrature weights on `[-1, 1]` for `n + 1` Lobatto nodes
/// (same descending ordering as [`chebyshev_diff_matrix`]).
pub fn clenshaw_curtis_weights(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![2.0];
    }
    let mut w = vec![0.0; n + 1];
    let theta: Vec<f64> = (0..=n).map(|i| PI * i as f64 / n as f64).collect();
    let mut v = vec![1.0; n - 1];
    if n % 2 == 0 {
        w[0] = 1.0 / ((n * n - 1) as f64);
        w[n] = w[0];
        for k in 1..n / 2 {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / ((4 * k * k - 1) as f64);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (n as f64 * theta[i + 1]).cos() / ((n * n - 1) as f64);
        }
    } else {
        w[0] = 1.0 / (n * n) as f64;
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / ((4 * k * k - 1) as f64);
            }
        }
    }
    for i in 1..n {
        w[i] = 2.0 * v[i - 1] / n as f64;
    }
    w
}

/// Fourier first-derivative matrix on `nq` uniform nodes (`nq` even).
pub fn fourier_diff_matrix(nq: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(nq, nq);
    for j in 0..nq {
        for m in 0..nq {
            if j != m {
                let k = j as isize - m as isize;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                d[(j, m)] = 0.5 * sign / (k as f64 * PI / nq as f64).tan();
            }
        }
    }
    d
}

/// Fourier second-derivative matrix on `nq` uniform nodes (`nq` even).
pub fn fourier_diff2_matrix(nq: usize) -> DMatrix<f64> {
    let n = nq as f64;
    let mut d = DMatrix::zeros(nq, nq);
    for j in 0..nq {
        for m in 0..nq {
            if j != m {
                let k = j as isize - m as isize;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let s = (k as f64 * PI / n).sin();
                d[(j, m)] = -sign / (2.0 * s * s);
            }
        }
    }
    for j in 0..nq {
        // analytically -n^2/12 - 1/6; the negative row sum keeps constants in
        // the kernel exactly
        let s: f64 = (0..nq).filter(|&m| m != j).map(|m| d[(j, m)]).sum();
        d[(j, j)] = -s;
    }
    d
}

/// Zero out row sums by absorbing the defect into the diagonal, so constants
/// are annihilated exactly. Valid for any differentiation matrix.
pub(crate) fn enforce_zero_row_sums(d: &mut DMatrix<f64>) {
    for j in 0..d.nrows() {
        let s: f64 = d.row(j).sum();
        d[(j, j)] -= s;
    }
}

impl Grid {
    pub fn q_spacing(&self) -> f64 {
        2.0 * PI / self.nq as f64
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.nq * self.np
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First-derivative matrix in `p` (acts on a single column of values).
    pub fn dp_matrix(&self) -> &DMatrix<f64> {
        &self.dp
    }

    pub fn dpp_matrix(&self) -> &DMatrix<f64> {
        &self.dpp
    }

    pub fn dq_matrix(&self) -> &DMatrix<f64> {
        &self.dq
    }

    pub fn dqq_matrix(&self) -> &DMatrix<f64> {
        &self.dqq
    }

    /// Quadrature of grid values over the channel.
    pub fn integrate(&self, values: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.nq {
            for i in 0..self.np {
                acc += self.wq[j] * self.wp[i] * values[(j, i)];
            }
        }
        acc
    }

    /// Quadrature of top-boundary values over `q`.
    pub fn integrate_top(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.wq).map(|(v, w)| v * w).sum()
    }
}

/// Build a grid; `nq` must be even and at least 4, `np` at least 4.
pub fn make_grid(nq: usize, np: usize) -> Result<Arc<Grid>> {
    if nq < 4 || nq % 2 != 0 {
        return Err(Error::Grid(format!("nq must be even and >= 4, got {nq}")));
    }
    if np < 4 {
        return Err(Error::Grid(format!("np must be >= 4, got {np}")));
    }
    let q: Vec<f64> = (0..nq).map(|j| 2.0 * PI * j as f64 / nq as f64).collect();
    let (x, dx) = chebyshev_diff_matrix(np - 1);
    // map x in [-1, 1] (descending) to p in [-1, 0] ascending
    let perm: Vec<usize> = (0..np).rev().collect();
    let p: Vec<f64> = perm.iter().map(|&i| (x[i] - 1.0) / 2.0).collect();
    let mut dp = DMatrix::zeros(np, np);
    for (r, &i) in perm.iter().enumerate() {
        for (c, &j) in perm.iter().enumerate() {
            dp[(r, c)] = 2.0 * dx[(i, j)];
        }
    }
    let mut dpp = &dp * &dp;
    enforce_zero_row_sums(&mut dpp);
    let wcc = clenshaw_curtis_weights(np - 1);
    let wp: Vec<f64> = perm.iter().map(|&i| wcc[i] * 0.5).collect();
    let wq = vec![2.0 * PI / nq as f64; nq];
    Ok(Arc::new(Grid {
        nq,
        np,
        q,
        p,
        wq,
        wp,
        dq: fourier_diff_matrix(nq),
        dqq: fourier_diff2_matrix(nq),
        dp,
        dpp,
    }))
}

/// A discrete function on the channel: values indexed `(q-node, p-node)`.
#[derive(Debug, Clone)]
pub struct Field2D {
    pub grid: Arc<Grid>,
    /// `nq x np` values; row `j` is the `q_j` ray, column `i` the `p_i` level.
    pub values: DMatrix<f64>,
    pub parity: Parity,
}

impl Field2D {
    pub fn new(grid: Arc<Grid>, values: DMatrix<f64>, parity: Parity) -> Result<Self> {
        if values.nrows() != grid.nq || values.ncols() != grid.np {
            return Err(Error::Grid(format!(
                "value shape {}x{} does not match grid {}x{}",
                values.nrows(),
                values.ncols(),
                grid.nq,
                grid.np
            )));
        }
        let f = Self { grid, values, parity };
        f.check_finite()?;
        Ok(f)
    }

    /// Sample a function of `(q, p)` on the grid.
    pub fn from_fn(grid: Arc<Grid>, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Self {
        let values =
            DMatrix::from_fn(grid.nq, grid.np, |j, i| f(grid.q[j], grid.p[i]));
        Self { grid, values, parity }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = DMatrix::zeros(grid.nq, grid.np);
        Self { grid, values, parity: Parity::Even }
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical("field contains NaN/Inf".into()))
        }
    }

    fn derived(&self, values: DMatrix<f64>, parity: Parity) -> Result<Self> {
        let f = Self { grid: self.grid.clone(), values, parity };
        f.check_finite()?;
        Ok(f)
    }

    /// Spectral `q`-derivative. Flips declared parity.
    pub fn d_q(&self) -> Result<Self> {
        let parity = match self.parity {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
            Parity::None => Parity::None,
        };
        self.derived(self.grid.dq_matrix() * &self.values, parity)
    }

    /// Second spectral `q`-derivative. Preserves parity.
    pub fn d_qq(&self) -> Result<Self> {
        self.derived(self.grid.dqq_matrix() * &self.values, self.parity)
    }

    /// Collocation `p`-derivative. Preserves parity.
    pub fn d_p(&self) -> Result<Self> {
        self.derived(&self.values * self.grid.dp_matrix().transpose(), self.parity)
    }

    pub fn d_pp(&self) -> Result<Self> {
        self.derived(&self.values * self.grid.dpp_matrix().transpose(), self.parity)
    }

    /// Mixed derivative `d_q d_p`. Flips parity.
    pub fn d_qp(&self) -> Result<Self> {
        self.d_p()?.d_q()
    }

    /// Values on the top boundary `p = 0`, one per `q`-node.
    pub fn trace_top(&self) -> Vec<f64> {
        (0..self.grid.nq)
            .map(|j| self.values[(j, self.grid.np - 1)])
            .collect()
    }

    /// Values on the bottom boundary `p = -1`.
    pub fn trace_bottom(&self) -> Vec<f64> {
        (0..self.grid.nq).map(|j| self.values[(j, 0)]).collect()
    }

    /// Idempotent projection onto the even-in-`q` subspace:
    /// `f(q_j) <- (f(q_j) + f(q_{nq-j})) / 2`.
    pub fn project_even(&self) -> Self {
        let nq = self.grid.nq;
        let mut values = self.values.clone();
        for j in 1..nq {
            let jr = nq - j;
            if j < jr {
                for i in 0..self.grid.np {
                    let avg = 0.5 * (self.values[(j, i)] + self.values[(jr, i)]);
                    values[(j, i)] = avg;
                    values[(jr, i)] = avg;
                }
            }
        }
        Self { grid: self.grid.clone(), values, parity: Parity::Even }
    }

    /// Max deviation from the declared even symmetry.
    pub fn even_defect(&self) -> f64 {
        let nq = self.grid.nq;
        let mut worst: f64 = 0.0;
        for j in 1..nq / 2 {
            for i in 0..self.grid.np {
                worst = worst.max((self.values[(j, i)] - self.values[(nq - j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Channel integral by quadrature.
    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Serialize to CSV with columns `q, p, value` (row-major over `q` then `p`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,p,value\n");
        for j in 0..self.grid.nq {
            for i in 0..self.grid.np {
                out.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e}\n",
                    self.grid.q[j],
                    self.grid.p[i],
                    self.values[(j, i)]
                ));
            }
        }
        out
    }

    /// Compact JSON with grid metadata; round-trips bit-exactly through
    /// [`Field2D::from_json`].
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nq": self.grid.nq,
            "np": self.grid.np,
            "parity": self.parity,
            "values": self.values.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::Grid(format!("field JSON: {m}"));
        let nq = value["nq"].as_u64().ok_or_else(|| bad("missing nq"))? as usize;
        let np = value["np"].as_u64().ok_or_else(|| bad("missing np"))? as usize;
        let parity: Parity = serde_json::from_value(value["parity"].clone())
            .map_err(|e| bad(&format!("parity: {e}")))?;
        let rows = value["values"].as_array().ok_or_else(|| bad("missing values"))?;
        if rows.len() != nq {
            return Err(bad("row count mismatch"));
        }
        let grid = make_grid(nq, np)?;
        let mut values = DMatrix::zeros(nq, np);
        for (j, row) in rows.iter().enumerate() {
            let row = row.as_array().ok_or_else(|| bad("row is not an array"))?;
            if row.len() != np {
                return Err(bad("column count mismatch"));
            }
            for (i, v) in row.iter().enumerate() {
                values[(j, i)] = v.as_f64().ok_or_else(|| bad("non-numeric entry"))?;
            }
        }
        Field2D::new(grid, values, parity)
    }
}

/// Barycentric weights for the ascending `[-1, 0]` Chebyshev-Lobatto nodes.
pub fn barycentric_weights(np: usize) -> Vec<f64> {
    // For Lobatto nodes the weights are (-1)^i with halved endpoints, up to a
    // common factor that cancels in the barycentric formula.
    (0..np)
        .map(|i| {
            let mut w = if i % 2 == 0 { 1.0 } else { -1.0 };
            if i == 0 || i == np - 1 {
                w *= 0.5;
            }
            w
        })
        .collect()
}

/// Barycentric interpolation of `(nodes, values)` at `x`.
pub fn barycentric_eval(nodes: &[f64], weights: &[f64], values: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..nodes.len() {
        let dx = x - nodes[i];
        if dx.abs() < 1e-300 {
            return values[i];
        }
        let t = weights[i] / dx;
        num += t * values[i];
        den += t;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_shapes_and_weights() {
        let g = make_grid(8, 5).unwrap();
        assert_eq!(g.len(), 40);
        assert!((g.q_spacing() - PI / 4.0).abs() < 1e-15);
        assert_eq!(g.p[0], -1.0);
        assert_eq!(g.p[4], 0.0);
        // quadrature of 1 over the channel = 2 pi
        let ones = Field2D::from_fn(g.clone(), Parity::Even, |_, _| 1.0);
        assert!((ones.integrate() - 2.0 * PI).abs() < 1e-13);
        // quadrature of cos q integrates to 0 exactly under the uniform rule
        let cosq = Field2D::from_fn(g, Parity::Even, |q, _| q.cos());
        assert!(cosq.integrate().abs() < 1e-14);
    }

    #[test]
    fn make_grid_rejects_bad_sizes() {
        assert!(make_grid(7, 8).is_err());
        assert!(make_grid(2, 8).is_err());
        assert!(make_grid(8, 3).is_err());
    }

    #[test]
    fn dq_exact_on_resolved_modes() {
        let g = make_grid(16, 6).unwrap();
        let f = Field2D::from_fn(g.clone(), Parity::Even, |q, p| q.cos() * (p + 2.0));
        let exact = Field2D::from_fn(g, Parity::Odd, |q, p| -q.sin() * (p + 2.0));
        let df = f.d_q().unwrap();
        assert_eq!(df.parity, Parity::Odd);
        let err = (&df.values - &exact.values).amax();
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn dp_spectral_convergence() {
        // error for e^{gamma (p+1)} should collapse by far more than any fixed
        // algebraic rate when np grows
        let gamma = 0.7;
        let mut errs = Vec::new();
        for np in [6, 10, 14] {
            let g = make_grid(8, np).unwrap();
            let f = Field2D::from_fn(g.clone(), Parity::Even, |_, p| (gamma * (p + 1.0)).exp());
            let ex = Field2D::from_fn(g, Parity::Even, |_, p| gamma * (gamma * (p + 1.0)).exp());
            errs.push((&f.d_p().unwrap().values - &ex.values).amax());
        }
        assert!(errs[1] < errs[0] / 16.0, "{errs:?}");
        assert!(errs[2] < 1e-11, "{errs:?}");
    }

    #[test]
    fn mixed_partials_commute() {
        let g = make_grid(16, 10).unwrap();
        let f = Field2D::from_fn(g, Parity::Even, |q, p| (2.0 * q).cos() * (0.5 * p).exp());
        let a = f.d_q().unwrap().d_p().unwrap();
        let b = f.d_p().unwrap().d_q().unwrap();
        assert!((&a.values - &b.values).amax() < 1e-12);
        assert!((&a.values - &f.d_qp().unwrap().values).amax() < 1e-12);
    }

    #[test]
    fn derivatives_annihilate_constants() {
        let g = make_grid(32, 16).unwrap();
        let one = Field2D::from_fn(g, Parity::Even, |_, _| 1.0);
        assert!(one.d_q().unwrap().max_abs() < 1e-13);
        assert!(one.d_p().unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn trace_top_values() {
        let gamma = 0.2f64;
        let g = make_grid(8, 6).unwrap();
        let h = Field2D::from_fn(g.clone(), Parity::Even, |_, p| crate::params::trivial_h(gamma, p));
        for v in h.trace_top() {
            assert!((v - gamma.exp_m1()).abs() < 1e-15);
        }
        let nm = Field2D::from_fn(g.clone(), Parity::Even, |q, p| crate::params::null_mode(gamma, q, p));
        for (j, v) in nm.trace_top().iter().enumerate() {
            let expect = (1.0 - (-2.0 * gamma).exp()) * g.q[j].cos();
            assert!((v - expect).abs() < 1e-15);
        }
        let z = Field2D::from_fn(g, Parity::Even, |q, p| p * (p + 0.0) * q.cos() * 0.0);
        assert!(z.trace_top().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn evenness_projection_idempotent() {
        let g = make_grid(16, 8).unwrap();
        let f = Field2D::from_fn(g, Parity::None, |q, p| (q - 1.0).sin() * p + q.cos());
        let p1 = f.project_even();
        let p2 = p1.project_even();
        assert!(p1.even_defect() < 1e-15);
        assert!((&p1.values - &p2.values).amax() == 0.0);
    }

    #[test]
    fn quadrature_spectral_accuracy() {
        // integral of e^{gamma p} cos^2 q over the channel has a closed form
        let gamma = 0.9f64;
        let exact = PI * (1.0 - (-gamma).exp()) / gamma;
        let mut errs = Vec::new();
        for (nq, np) in [(8, 6), (16, 12)] {
            let g = make_grid(nq, np).unwrap();
            let f = Field2D::from_fn(g, Parity::Even, |q, p| (gamma * p).exp() * q.cos() * q.cos());
            errs.push((f.integrate() - exact).abs());
        }
        assert!(errs[1] < errs[0] / 16.0 || errs[1] < 1e-13, "{errs:?}");
    }

    #[test]
    fn json_round_trip_bit_exact() {
        let g = make_grid(8, 5).unwrap();
        let f = Field2D::from_fn(g, Parity::Even, |q, p| (q.cos() + 0.1) * (1.0 / 3.0 + p).exp());
        let j = f.to_json();
        let text = serde_json::to_string(&j).unwrap();
        let back = Field2D::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.parity, Parity::Even);
        for (a, b) in f.values.iter().zip(back.values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_has_expected_shape() {
        let g = make_grid(4, 4).unwrap();
        let f = Field2D::zeros(g);
        let csv = f.to_csv();
        assert_eq!(csv.lines().count(), 1 + 16);
        assert!(csv.starts_with("q,p,value"));
    }

    #[test]
    fn barycentric_interpolates_smooth_functions() {
        let np = 20;
        let g = make_grid(4, np).unwrap();
        let w = barycentric_weights(np);
        let vals: Vec<f64> = g.p.iter().map(|&p| (1.3 * p).exp()).collect();
        for t in [-0.95, -0.61, -0.24, -0.03] {
            let v = barycentric_eval(&g.p, &w, &vals, t);
            assert!((v - (1.3 * t).exp()).abs() < 1e-13);
        }
        // hits nodes exactly
        assert_eq!(barycentric_eval(&g.p, &w, &vals, g.p[3]), vals[3]);
    }
}
