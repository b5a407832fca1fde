//! Inversion of the semi-hodograph transform: from a height solution
//! `h(q, p)` back to the annular flow.
//!
//! For each ray `Theta = q_j` the stream function solves the radial ODE
//! `dPsi/dR = -F(Theta, -Psi)` with `F = 1/h_p` and `Psi(S(Theta)) = 0`,
//! integrated down to the bed `R = 1` where `Psi = 1` must come out (the
//! normalized mass flux). Fields live on the tensor grid
//! `rho_i x Theta_j` with `R = 1 + rho (S(Theta) - 1)`, `rho` uniform in
//! `[0, 1]`.

use crate::fields::{barycentric_eval, barycentric_weights, Field2D};
use crate::params::{self, ModelParams};
use crate::{Error, Result};
use nalgebra::DMatrix;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Characteristic scales for optional dimensional output.
#[derive(Debug, Clone, Copy)]
pub struct DimensionalParams {
    /// Inner radius (length).
    pub a: f64,
    /// Half-vorticity scale (1/time).
    pub omega0: f64,
    /// Density (mass/volume).
    pub rho: f64,
    /// Gravitational acceleration.
    pub g: f64,
    /// Atmospheric pressure.
    pub p_atm: f64,
}

impl DimensionalParams {
    pub fn validate(&self, params: &ModelParams, alpha: f64) -> Result<()> {
        if !(self.a > 0.0 && self.omega0 > 0.0 && self.rho > 0.0 && self.g > 0.0) {
            return Err(Error::InvalidParams(
                "dimensional scales a, omega0, rho, g must be positive".into(),
            ));
        }
        let alpha_dim = self.g / (self.a * self.omega0 * self.omega0);
        if (alpha_dim - alpha).abs() > 1e-8 * alpha.abs().max(1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha = g/(a omega0^2) = {alpha_dim} inconsistent with requested alpha = {alpha}"
            )));
        }
        let _ = params;
        Ok(())
    }

    /// Dimensionless background pressure `Q0 = p_atm / (a^2 omega0^2 rho)`.
    pub fn q0(&self) -> f64 {
        self.p_atm / (self.a * self.a * self.omega0 * self.omega0 * self.rho)
    }
}

/// Reconstructed flow on the annulus, dimensionless unless stated otherwise.
#[derive(Debug, Clone)]
pub struct PhysicalFields {
    /// Ray angles (the `q`-nodes of the source height grid).
    pub theta: Vec<f64>,
    /// Uniform radial coordinates `rho` in `[0, 1]`; `R = 1 + rho (S - 1)`.
    pub rho: Vec<f64>,
    /// Free-surface radius per ray, `> 1`.
    pub surface: Vec<f64>,
    /// `nr x ntheta` stream function values (row = fixed rho).
    pub psi: DMatrix<f64>,
    /// Radial relative velocity `U`.
    pub u: DMatrix<f64>,
    /// Azimuthal velocity `V`.
    pub v: DMatrix<f64>,
    /// Pressure deviation.
    pub upsilon: DMatrix<f64>,
    /// Bernoulli constant used for the pressure reconstruction.
    pub e_const: f64,
    /// Kinetic energy density via the height-route azimuthal/radial derivatives,
    /// kept for the conservation cross-check.
    kinetic_height_route: DMatrix<f64>,
    alpha: f64,
    q0: f64,
    p0: f64,
}

impl PhysicalFields {
    pub fn r_at(&self, i: usize, j: usize) -> f64 {
        1.0 + self.rho[i] * (self.surface[j] - 1.0)
    }
}

/// Free-surface radius `S(Theta) = h(Theta, 0) + 1`; errors if any value is
/// not strictly above the bed.
pub fn surface(h: &Field2D) -> Result<Vec<f64>> {
    let s: Vec<f64> = h.trace_top().iter().map(|v| v + 1.0).collect();
    if s.iter().any(|v| *v <= 1.0) {
        return Err(Error::Inadmissible("free surface must satisfy S > 1".into()));
    }
    Ok(s)
}

/// Dormand-Prince 5(4) step for a scalar ODE `y' = f(x, y)`.
/// Returns (y5, y4) over one step of size `dx`.
fn dopri_step(f: &impl Fn(f64, f64) -> f64, x: f64, y: f64, dx: f64) -> (f64, f64) {
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    const E1: f64 = 5179.0 / 57600.0;
    const E3: f64 = 7571.0 / 16695.0;
    const E4: f64 = 393.0 / 640.0;
    const E5: f64 = -92097.0 / 339200.0;
    const E6: f64 = 187.0 / 2100.0;
    const E7: f64 = 1.0 / 40.0;
    let k1 = f(x, y);
    let k2 = f(x + C2 * dx, y + dx * A21 * k1);
    let k3 = f(x + C3 * dx, y + dx * (A31 * k1 + A32 * k2));
    let k4 = f(x + C4 * dx, y + dx * (A41 * k1 + A42 * k2 + A43 * k3));
    let k5 = f(x + C5 * dx, y + dx * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
    let k6 = f(x + dx, y + dx * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
    let y5 = y + dx * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
    let k7 = f(x + dx, y5);
    let y4 = y + dx * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    (y5, y4)
}

/// Integrate `y' = f(x, y)` from `x0` (value `y0`) through the strictly
/// monotone output abscissae `targets` (same direction as `targets[0] - x0`),
/// with adaptive Dormand-Prince steps clamped to each target.
fn integrate_to(
    f: &impl Fn(f64, f64) -> f64,
    x0: f64,
    y0: f64,
    targets: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(targets.len());
    let mut x = x0;
    let mut y = y0;
    let dir = if targets.last().copied().unwrap_or(x0) >= x0 { 1.0 } else { -1.0 };
    let span = (targets.last().copied().unwrap_or(x0) - x0).abs().max(1e-12);
    let mut dx = dir * (span / 16.0).min(0.1);
    for &target in targets {
        if (target - x) * dir < 0.0 {
            return Err(Error::Reconstruction("output points not monotone".into()));
        }
        let mut guard = 0usize;
        while (target - x) * dir > 1e-14 * span {
            guard += 1;
            if guard > 100_000 {
                return Err(Error::Reconstruction("step failure: too many ODE steps".into()));
            }
            let mut step = dx;
            if (x + step - target) * dir > 0.0 {
                step = target - x;
            }
            let (y5, y4) = dopri_step(f, x, y, step);
            let err = (y5 - y4).abs();
            let scale = tol * (1.0 + y.abs());
            if err <= scale || step.abs() < 1e-13 * span {
                x += step;
                y = y5;
                let factor = if err > 0.0 { (scale / err).powf(0.2) } else { 5.0 };
                dx = step * factor.clamp(0.2, 5.0);
                if dx.abs() < 1e-13 * span {
                    dx = dir * 1e-13 * span;
                }
            } else {
                dx = step * (scale / err).powf(0.2).clamp(0.2, 0.9);
            }
            if !y.is_finite() {
                return Err(Error::Reconstruction("ODE solution became non-finite".into()));
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Per-ray data extracted from the height field.
struct Ray {
    /// `1/h_p` values at the `p`-nodes.
    f_vals: Vec<f64>,
    /// `h_q/h_p` values at the `p`-nodes (the azimuthal slope route).
    g_vals: Vec<f64>,
    surface: f64,
}

fn extract_rays(h: &Field2D) -> Result<Vec<Ray>> {
    let grid = &h.grid;
    let hp = h.d_p()?;
    let hq = h.d_q()?;
    let s = surface(h)?;
    let mut rays = Vec::with_capacity(grid.nq);
    for j in 0..grid.nq {
        let mut f_vals = Vec::with_capacity(grid.np);
        let mut g_vals = Vec::with_capacity(grid.np);
        for i in 0..grid.np {
            let hpv = hp.values[(j, i)];
            if hpv <= 0.0 {
                return Err(Error::Reconstruction(format!(
                    "h_p <= 0 at ray {j}, level {i}: the transform is not invertible"
                )));
            }
            f_vals.push(1.0 / hpv);
            g_vals.push(hq.values[(j, i)] / hpv);
        }
        rays.push(Ray { f_vals, g_vals, surface: s[j] });
    }
    Ok(rays)
}

/// Integrate the stream function on the `nr x ntheta` tensor grid.
///
/// Velocities and pressure are filled by [`velocities`]; `psi` alone is valid
/// after this call, with `psi = 0` on the surface row and `psi = 1` at the bed
/// up to the integration tolerance.
pub fn stream_from_height(h: &Field2D, nr: usize, params: &ModelParams) -> Result<PhysicalFields> {
    stream_impl(h, nr, params, true)
}

/// Sequential reference path of [`stream_from_height`], kept unconditionally
/// for benchmarking against the parallel one.
pub fn stream_from_height_seq(
    h: &Field2D,
    nr: usize,
    params: &ModelParams,
) -> Result<PhysicalFields> {
    stream_impl(h, nr, params, false)
}

fn stream_impl(
    h: &Field2D,
    nr: usize,
    params: &ModelParams,
    parallel: bool,
) -> Result<PhysicalFields> {
    if nr < 4 {
        return Err(Error::Grid("nr must be at least 4".into()));
    }
    let grid = &h.grid;
    let rays = extract_rays(h)?;
    let bw = barycentric_weights(grid.np);
    let pnodes = grid.p.clone();
    let rho: Vec<f64> = (0..nr).map(|i| i as f64 / (nr - 1) as f64).collect();
    let integrate_ray = |ray: &Ray| -> Result<Vec<f64>> {
        let f = |_r: f64, psi: f64| {
            let p = (-psi).clamp(-1.0 - 1e-9, 1e-9);
            -barycentric_eval(&pnodes, &bw, &ray.f_vals, p)
        };
        // descending radii from the surface (rho = 1) to the bed (rho = 0)
        let targets: Vec<f64> = (0..nr)
            .rev()
            .map(|i| 1.0 + rho[i] * (ray.surface - 1.0))
            .skip(1)
            .collect();
        let mut col = integrate_to(&f, ray.surface, 0.0, &targets, 1e-10)?;
        col.reverse();
        col.push(0.0); // surface value
        // col is now ascending in rho: [bed, ..., surface]
        let mut prev = f64::INFINITY;
        for &v in col.iter() {
            if v >= prev {
                return Err(Error::Reconstruction(
                    "stream function is not strictly decreasing in R".into(),
                ));
            }
            prev = v;
        }
        Ok(col)
    };
    #[cfg(feature = "parallel")]
    let columns: Result<Vec<Vec<f64>>> = if parallel {
        rays.par_iter().map(integrate_ray).collect()
    } else {
        rays.iter().map(integrate_ray).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Result<Vec<Vec<f64>>> = {
        let _ = parallel;
        rays.iter().map(integrate_ray).collect()
    };
    let columns = columns?;
    let ntheta = grid.nq;
    let mut psi = DMatrix::zeros(nr, ntheta);
    for (j, col) in columns.iter().enumerate() {
        for i in 0..nr {
            psi[(i, j)] = col[i];
        }
    }
    Ok(PhysicalFields {
        theta: grid.q.clone(),
        rho,
        surface: rays.iter().map(|r| r.surface).collect(),
        psi,
        u: DMatrix::zeros(nr, ntheta),
        v: DMatrix::zeros(nr, ntheta),
        upsilon: DMatrix::zeros(nr, ntheta),
        e_const: 0.0,
        kinetic_height_route: DMatrix::zeros(nr, ntheta),
        alpha: 0.0,
        q0: 0.0,
        p0: params.p0(),
    })
}

/// Fill `U`, `V` and the pressure deviation.
///
/// `V - R = -p0 dPsi/dR` with `dPsi/dR = -1/h_p` read off the height field;
/// `U = (p0/R) dPsi/dTheta` with the `Theta`-derivative taken spectrally at
/// fixed `rho` and corrected for the moving surface. The pressure deviation
/// comes from the Bernoulli relation with the height-route kinetic energy, so
/// the later Bernoulli check crosses the two derivative routes. If `dim` is
/// given, `Q0` enters the Bernoulli constant (fields stay dimensionless; see
/// [`to_dimensional`]).
pub fn velocities(
    fields: &mut PhysicalFields,
    h: &Field2D,
    params: &ModelParams,
    alpha: f64,
    dim: Option<&DimensionalParams>,
) -> Result<()> {
    let grid = &h.grid;
    let nr = fields.rho.len();
    let ntheta = fields.theta.len();
    if ntheta != grid.nq {
        return Err(Error::Grid("field/height grid mismatch".into()));
    }
    if let Some(d) = dim {
        d.validate(params, alpha)?;
    }
    let rays = extract_rays(h)?;
    let bw = barycentric_weights(grid.np);
    let p0 = params.p0();
    let q0 = dim.map(|d| d.q0()).unwrap_or(0.0);
    // surface derivative S'(Theta), spectral over the full periodic grid
    let s_vec = nalgebra::DVector::from_column_slice(&fields.surface);
    let sprime = grid.dq_matrix() * &s_vec;
    // dPsi/dTheta at fixed rho: spectral derivative along each row
    let dpsi_dtheta_rows = &fields.psi * grid.dq_matrix().transpose();
    let lambda = params::lambda_of(params, alpha);
    let e_const = lambda + q0 - alpha;
    fields.e_const = e_const;
    fields.alpha = alpha;
    fields.q0 = q0;
    for j in 0..ntheta {
        let ray = &rays[j];
        for i in 0..nr {
            let r = 1.0 + fields.rho[i] * (ray.surface - 1.0);
            let p = (-fields.psi[(i, j)]).clamp(-1.0 - 1e-9, 1e-9);
            let f_here = barycentric_eval(&grid.p, &bw, &ray.f_vals, p);
            let g_here = barycentric_eval(&grid.p, &bw, &ray.g_vals, p);
            // V - R = -p0 Psi_R, Psi_R = -F
            let v = r + p0 * f_here;
            // Theta-derivative at fixed R adds the surface-motion term
            let psi_theta = dpsi_dtheta_rows[(i, j)] + fields.rho[i] * f_here * sprime[j];
            let u = p0 / r * psi_theta;
            fields.u[(i, j)] = u;
            fields.v[(i, j)] = v;
            // height-route kinetic energy: U = p0 h_q / (R h_p) along the ray
            let u_height = p0 * g_here / r;
            let kin = 0.5 * ((v - r) * (v - r) + u_height * u_height);
            fields.kinetic_height_route[(i, j)] = kin;
            fields.upsilon[(i, j)] =
                e_const - kin - alpha * (r - 1.0) - q0 - 2.0 * p0 * fields.psi[(i, j)] + 0.5 * r * r;
        }
    }
    Ok(())
}

/// Full pipeline: stream function, then velocities/pressure.
pub fn reconstruct(
    h: &Field2D,
    nr: usize,
    params: &ModelParams,
    alpha: f64,
    dim: Option<&DimensionalParams>,
) -> Result<PhysicalFields> {
    let mut fields = stream_from_height(h, nr, params)?;
    velocities(&mut fields, h, params, alpha, dim)?;
    Ok(fields)
}

/// Sequential reference pipeline for benchmarking.
pub fn reconstruct_seq(
    h: &Field2D,
    nr: usize,
    params: &ModelParams,
    alpha: f64,
    dim: Option<&DimensionalParams>,
) -> Result<PhysicalFields> {
    let mut fields = stream_from_height_seq(h, nr, params)?;
    velocities(&mut fields, h, params, alpha, dim)?;
    Ok(fields)
}

/// Dimensional `(u_r, u_theta, eta, pressure)` values from the dimensionless
/// fields: velocities scale by `a omega0`, lengths by `a`, pressures by
/// `a^2 omega0^2 rho`.
pub fn to_dimensional(
    fields: &PhysicalFields,
    dim: &DimensionalParams,
) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let vel = dim.a * dim.omega0;
    let u_r = &fields.u * vel;
    let u_theta = &fields.v * vel;
    let eta: Vec<f64> = fields.surface.iter().map(|s| s * dim.a).collect();
    let pscale = dim.a * dim.a * dim.omega0 * dim.omega0 * dim.rho;
    let pressure = DMatrix::from_fn(fields.upsilon.nrows(), fields.upsilon.ncols(), |i, j| {
        (fields.upsilon[(i, j)] + dim.q0()) * pscale
    });
    (u_r, u_theta, eta, pressure)
}

/// Evaluate the Bernoulli combination over the whole sample with the
/// stream-route kinetic energy and report `(mean, max |E - mean|)`.
///
/// The pressure was reconstructed with the height-route kinetic energy, so the
/// spread measures the agreement of the two independent derivative routes
/// (zero in exact arithmetic for any admissible height field).
pub fn bernoulli_check(fields: &PhysicalFields) -> (f64, f64) {
    let nr = fields.rho.len();
    let nt = fields.theta.len();
    let mut values = Vec::with_capacity(nr * nt);
    for j in 0..nt {
        for i in 0..nr {
            let r = fields.r_at(i, j);
            let kin = 0.5
                * ((fields.v[(i, j)] - r) * (fields.v[(i, j)] - r)
                    + fields.u[(i, j)] * fields.u[(i, j)]);
            let e = kin
                + fields.alpha * (r - 1.0)
                + fields.upsilon[(i, j)]
                + fields.q0
                + 2.0 * fields.p0 * fields.psi[(i, j)]
                - 0.5 * r * r;
            values.push(e);
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    (mean, spread)
}

/// Max deviation of the surface Bernoulli combination
/// `((V-R)^2 + U^2)/2 + alpha R - R^2/2` from the head `lambda(alpha, gamma)`.
pub fn surface_lambda_spread(fields: &PhysicalFields, params: &ModelParams, alpha: f64) -> f64 {
    let lambda = params::lambda_of(params, alpha);
    let i = fields.rho.len() - 1;
    let mut worst = 0.0f64;
    for j in 0..fields.theta.len() {
        let r = fields.surface[j];
        let kin = 0.5
            * ((fields.v[(i, j)] - r) * (fields.v[(i, j)] - r) + fields.u[(i, j)] * fields.u[(i, j)]);
        worst = worst.max((kin + alpha * r - 0.5 * r * r - lambda).abs());
    }
    worst
}

/// Per-ray normalized mass flux `Psi(S) - Psi(1) = -Psi(1)`; `-1` for an exact
/// reconstruction.
pub fn mass_flux(fields: &PhysicalFields) -> Vec<f64> {
    (0..fields.theta.len()).map(|j| -fields.psi[(0, j)]).collect()
}

/// Max over deterministic sample points of `|h(Theta, -Psi(R, Theta)) - (R - 1)|`,
/// the round-trip identity of the inverse transform, with `Psi` freshly
/// integrated at tight tolerance. Samples `n` points spread over rays and
/// radii by a low-discrepancy rule.
pub fn round_trip_error(h: &Field2D, n: usize) -> Result<f64> {
    let grid = &h.grid;
    let rays = extract_rays(h)?;
    let bw = barycentric_weights(grid.np);
    let mut worst = 0.0f64;
    let golden = 0.618_033_988_749_894_9_f64;
    let mut frac = 0.37;
    for k in 0..n {
        let j = (k * 7) % grid.nq;
        frac = (frac + golden) % 1.0;
        let ray = &rays[j];
        let r_target = 1.0 + (0.02 + 0.96 * frac) * (ray.surface - 1.0);
        let f = |_r: f64, psi: f64| {
            let p = (-psi).clamp(-1.0 - 1e-9, 1e-9);
            -barycentric_eval(&grid.p, &bw, &ray.f_vals, p)
        };
        let psi_here = integrate_to(&f, ray.surface, 0.0, &[r_target], 1e-11)?[0];
        // h at (Theta_j, -psi) by barycentric interpolation in p
        let hvals: Vec<f64> = (0..grid.np).map(|i| h.values[(j, i)]).collect();
        let hval = barycentric_eval(&grid.p, &bw, &hvals, (-psi_here).clamp(-1.0, 0.0));
        worst = worst.max((hval - (r_target - 1.0)).abs());
    }
    Ok(worst)
}

/// CSV with columns `Theta, R, Psi, U, V, Upsilon`.
pub fn fields_to_csv(fields: &PhysicalFields) -> String {
    let mut out = String::from("Theta,R,Psi,U,V,Upsilon\n");
    for j in 0..fields.theta.len() {
        for i in 0..fields.rho.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                fields.theta[j],
                fields.r_at(i, j),
                fields.psi[(i, j)],
                fields.u[(i, j)],
                fields.v[(i, j)],
                fields.upsilon[(i, j)],
            ));
        }
    }
    out
}

/// CSV with columns `Theta, S`.
pub fn surface_to_csv(fields: &PhysicalFields) -> String {
    let mut out = String::from("Theta,S\n");
    for j in 0..fields.theta.len() {
        out.push_str(&format!("{:.17e},{:.17e}\n", fields.theta[j], fields.surface[j]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::*;
    use crate::fields::{make_grid, Parity};
    use crate::linops::trivial_field;

    #[test]
    fn surface_of_trivial_solution_is_circle() {
        let params = ex1();
        let grid = make_grid(16, 12).unwrap();
        let h = trivial_field(&params, grid);
        let s = surface(&h).unwrap();
        for v in s {
            assert!((v - 0.2f64.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn surface_first_order_expansion() {
        let params = ex1();
        let g = params.gamma;
        let grid = make_grid(32, 16).unwrap();
        let eps = 1e-4;
        let chat = params::c_hat(g);
        let h = Field2D::from_fn(grid.clone(), Parity::Even, |q, p| {
            params::trivial_h(g, p) + eps * params::null_mode(g, q, p) / chat
        });
        let s = surface(&h).unwrap();
        for (j, v) in s.iter().enumerate() {
            let predicted =
                g.exp() + eps * (1.0 - (-2.0 * g).exp()) * grid.q[j].cos() / chat;
            assert!((v - predicted).abs() < 10.0 * eps * eps, "{v} vs {predicted}");
        }
    }

    #[test]
    fn surface_rejects_submerged_heights() {
        let grid = make_grid(8, 6).unwrap();
        let h = Field2D::from_fn(grid, Parity::Even, |_, p| -0.5 * (p + 1.0).max(0.0) - 0.1);
        assert!(surface(&h).is_err());
    }

    #[test]
    fn trivial_stream_function_is_logarithmic() {
        let params = ex1();
        let g = params.gamma;
        let grid = make_grid(8, 24).unwrap();
        let h = trivial_field(&params, grid);
        let fields = stream_from_height(&h, 33, &params).unwrap();
        for j in 0..fields.theta.len() {
            for i in 0..fields.rho.len() {
                let r = fields.r_at(i, j);
                let exact = 1.0 - r.ln() / g;
                assert!(
                    (fields.psi[(i, j)] - exact).abs() < 1e-8,
                    "psi({r}) = {} vs {exact}",
                    fields.psi[(i, j)]
                );
            }
        }
        // boundary values
        for j in 0..fields.theta.len() {
            assert_eq!(fields.psi[(fields.rho.len() - 1, j)], 0.0);
            assert!((fields.psi[(0, j)] - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn trivial_velocities_and_conservation() {
        let params = ex1();
        let g = params.gamma;
        let grid = make_grid(16, 24).unwrap();
        let h = trivial_field(&params, grid);
        let alpha = EX1_ALPHA_C;
        let fields = reconstruct(&h, 33, &params, alpha, None).unwrap();
        let p0 = params.p0();
        for j in 0..fields.theta.len() {
            for i in 0..fields.rho.len() {
                let r = fields.r_at(i, j);
                assert!(fields.u[(i, j)].abs() < 1e-8, "U = {}", fields.u[(i, j)]);
                let v_minus_r = p0 / (g * r);
                assert!((fields.v[(i, j)] - r - v_minus_r).abs() < 1e-8);
                assert!(fields.v[(i, j)] < r, "V < R must hold for p0 < 0");
            }
        }
        let (mean, spread) = bernoulli_check(&fields);
        assert!(spread < 1e-9, "Bernoulli spread {spread}");
        assert!((mean - fields.e_const).abs() < 1e-9);
        let flux = mass_flux(&fields);
        for f in &flux {
            assert!((f + 1.0).abs() < 1e-9, "flux {f}");
        }
        assert!(surface_lambda_spread(&fields, &params, alpha) < 1e-9);
        let rt = round_trip_error(&h, 100).unwrap();
        assert!(rt < 1e-8, "round trip {rt}");
    }

    #[test]
    fn bottom_condition_u_vanishes() {
        let params = ex1();
        let g = params.gamma;
        let grid = make_grid(32, 20).unwrap();
        // an admissible non-solution height field with q-dependence
        let h = Field2D::from_fn(grid, Parity::Even, |q, p| {
            params::trivial_h(g, p) + 0.02 * (p + 1.0) * q.cos()
        });
        let fields = reconstruct(&h, 33, &params, EX1_ALPHA_C, None).unwrap();
        for j in 0..fields.theta.len() {
            assert!(fields.u[(0, j)].abs() < 1e-7, "U at bed = {}", fields.u[(0, j)]);
        }
    }

    #[test]
    fn flux_constant_for_perturbed_height() {
        let params = ex1();
        let g = params.gamma;
        let grid = make_grid(32, 24).unwrap();
        let chat = params::c_hat(g);
        let h = Field2D::from_fn(grid, Parity::Even, |q, p| {
            params::trivial_h(g, p) + 0.05 * params::null_mode(g, q, p) / chat
        });
        let fields = reconstruct(&h, 41, &params, EX1_ALPHA_C, None).unwrap();
        let flux = mass_flux(&fields);
        let spread =
            flux.iter().fold(0.0f64, |m, v| m.max((v + 1.0).abs()));
        assert!(spread < 1e-7, "flux spread {spread}");
        // two-route Bernoulli agreement for an arbitrary admissible field
        let (_, bspread) = bernoulli_check(&fields);
        assert!(bspread < 1e-6, "Bernoulli spread {bspread}");
        let rt = round_trip_error(&h, 100).unwrap();
        assert!(rt < 1e-6, "round trip {rt}");
    }

    #[test]
    fn spreads_shrink_under_height_grid_refinement() {
        // in the interpolation-limited regime the conservation defects drop by
        // far more than 4x when the p-resolution doubles; needs a height field
        // steep enough that a 6-node interpolant of 1/h_p is visibly wrong
        let params = ModelParams::new(0.9, 0.4).unwrap();
        let g = params.gamma;
        let alpha = params::alpha_c(&params);
        let run = |np: usize| {
            let grid = make_grid(16, np).unwrap();
            let h = Field2D::from_fn(grid, Parity::Even, |q, p| {
                params::trivial_h(g, p)
                    + 0.25 * (p + 1.0).powi(2) * q.cos()
                    + 0.15 * (p + 1.0).powi(3) * (2.0 * q).cos()
            });
            let fields = reconstruct(&h, 25, &params, alpha, None).unwrap();
            let flux = mass_flux(&fields);
            let fs = flux.iter().fold(0.0f64, |m, v| m.max((v + 1.0).abs()));
            let (_, bs) = bernoulli_check(&fields);
            (fs, bs)
        };
        let (f_coarse, b_coarse) = run(6);
        let (f_fine, b_fine) = run(12);
        assert!(f_fine < f_coarse / 4.0, "flux {f_coarse} -> {f_fine}");
        assert!(b_fine < b_coarse / 4.0, "bernoulli {b_coarse} -> {b_fine}");
    }

    #[test]
    fn psi_monotone_violation_detected() {
        let params = ex1();
        let grid = make_grid(8, 8).unwrap();
        let bad = Field2D::from_fn(grid, Parity::Even, |_, p| -(p + 1.0) * 0.4);
        assert!(stream_from_height(&bad, 9, &params).is_err());
    }

    #[test]
    fn dimensional_scaling_consistency() {
        let params = ex1();
        let alpha = EX1_ALPHA_C;
        let grid = make_grid(8, 16).unwrap();
        let h = trivial_field(&params, grid);
        let a = 2.0;
        let omega0 = 0.7;
        let dim = DimensionalParams {
            a,
            omega0,
            rho: 1000.0,
            g: alpha * a * omega0 * omega0,
            p_atm: 101325.0,
        };
        let fields = reconstruct(&h, 17, &params, alpha, Some(&dim)).unwrap();
        let (u_r, u_theta, eta, pressure) = to_dimensional(&fields, &dim);
        assert!((eta[0] - a * 0.2f64.exp()).abs() < 1e-12);
        for j in 0..fields.theta.len() {
            for i in 0..fields.rho.len() {
                assert!((u_r[(i, j)] - a * omega0 * fields.u[(i, j)]).abs() < 1e-12);
                assert!(
                    (u_theta[(i, j)] - a * omega0 * fields.v[(i, j)]).abs() < 1e-12
                );
            }
        }
        // pressure at the surface equals atmospheric
        let i_top = fields.rho.len() - 1;
        for j in 0..fields.theta.len() {
            assert!((pressure[(i_top, j)] - dim.p_atm).abs() < 1e-6 * dim.p_atm);
        }
        // inconsistent alpha rejected
        let bad = DimensionalParams { g: 9.81, ..dim };
        assert!(bad.validate(&params, alpha).is_err());
    }
}
