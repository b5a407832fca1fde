//! Classification of the `(gamma, lambda)` parameter plane: feasibility of the
//! critical pair and the pitchfork direction at each cell.

use crate::params::{self, BifurcationClass, ModelParams};
use crate::Result;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One cell of the parameter-region sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegionCell {
    pub gamma: f64,
    pub lambda: f64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub o_total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<BifurcationClass>,
}

/// Rectangular sweep result, row-major over the `gamma` axis first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionGrid {
    pub gammas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `cells[ig * lambdas.len() + il]` is the cell at `(gammas[ig], lambdas[il])`.
    pub cells: Vec<RegionCell>,
}

/// Default sweep window: covers both benchmark points with margin.
pub const DEFAULT_GAMMA_RANGE: (f64, f64) = (0.05, 0.95);
pub const DEFAULT_LAMBDA_RANGE: (f64, f64) = (0.5, 2.5);
pub const DEFAULT_RESOLUTION: usize = 101;

/// Classify a single `(gamma, lambda)` point.
pub fn classify_cell(gamma: f64, lambda: f64, tol: f64) -> RegionCell {
    match params::solve_critical_pair(gamma, lambda) {
        Ok((alpha_c, p0sq)) => {
            let cell = ModelParams::new(gamma, p0sq).ok().and_then(|p| {
                let o = params::o_total(&p).ok()?;
                let class = params::classify(&p, tol).ok()?;
                Some((o, class))
            });
            match cell {
                Some((o, class)) => RegionCell {
                    gamma,
                    lambda,
                    feasible: true,
                    alpha_c: Some(alpha_c),
                    p0sq: Some(p0sq),
                    o_total: Some(o),
                    class: Some(class),
                },
                None => RegionCell {
                    gamma,
                    lambda,
                    feasible: false,
                    alpha_c: None,
                    p0sq: None,
                    o_total: None,
                    class: None,
                },
            }
        }
        Err(_) => RegionCell {
            gamma,
            lambda,
            feasible: false,
            alpha_c: None,
            p0sq: None,
            o_total: None,
            class: None,
        },
    }
}

fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sweep the rectangle; cells evaluate independently (in parallel with the
/// `parallel` feature), results assembled in deterministic row-major order.
pub fn sweep_region(
    gamma_range: (f64, f64),
    lambda_range: (f64, f64),
    n_gamma: usize,
    n_lambda: usize,
    tol: f64,
) -> Result<RegionGrid> {
    check_ranges(gamma_range, n_gamma, n_lambda)?;
    let gammas = axis(gamma_range, n_gamma);
    let lambdas = axis(lambda_range, n_lambda);
    let idx: Vec<(usize, usize)> =
        (0..n_gamma).flat_map(|ig| (0..n_lambda).map(move |il| (ig, il))).collect();
    #[cfg(feature = "parallel")]
    let cells: Vec<RegionCell> = idx
        .par_iter()
        .map(|&(ig, il)| classify_cell(gammas[ig], lambdas[il], tol))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<RegionCell> = idx
        .iter()
        .map(|&(ig, il)| classify_cell(gammas[ig], lambdas[il], tol))
        .collect();
    Ok(RegionGrid { gammas, lambdas, cells })
}

/// Sequential reference sweep, kept unconditionally for benchmarking against
/// the parallel path.
pub fn sweep_region_seq(
    gamma_range: (f64, f64),
    lambda_range: (f64, f64),
    n_gamma: usize,
    n_lambda: usize,
    tol: f64,
) -> Result<RegionGrid> {
    check_ranges(gamma_range, n_gamma, n_lambda)?;
    let gammas = axis(gamma_range, n_gamma);
    let lambdas = axis(lambda_range, n_lambda);
    let mut cells = Vec::with_capacity(n_gamma * n_lambda);
    for &g in &gammas {
        for &l in &lambdas {
            cells.push(classify_cell(g, l, tol));
        }
    }
    Ok(RegionGrid { gammas, lambdas, cells })
}

fn check_ranges(gamma_range: (f64, f64), n_gamma: usize, n_lambda: usize) -> Result<()> {
    if !(gamma_range.0 > 0.0 && gamma_range.1 < 1.0 && gamma_range.0 < gamma_range.1) {
        return Err(crate::Error::InvalidParams(format!(
            "gamma range must lie inside (0, 1), got {gamma_range:?}"
        )));
    }
    if n_gamma < 2 || n_lambda < 2 {
        return Err(crate::Error::InvalidParams(
            "resolution must be at least 2 per axis".into(),
        ));
    }
    Ok(())
}

impl RegionGrid {
    pub fn cell(&self, ig: usize, il: usize) -> &RegionCell {
        &self.cells[ig * self.lambdas.len() + il]
    }

    /// Cell whose center is nearest to `(gamma, lambda)` in index space.
    pub fn nearest_cell(&self, gamma: f64, lambda: f64) -> &RegionCell {
        let pick = |axis: &[f64], v: f64| -> usize {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().partial_cmp(&(b.1 - v).abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        self.cell(pick(&self.gammas, gamma), pick(&self.lambdas, lambda))
    }

    /// CSV with one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,lambda,feasible,alpha_c,p0sq,o_total,class\n");
        for c in &self.cells {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
            out.push_str(&format!(
                "{:.17e},{:.17e},{},{},{},{},{}\n",
                c.gamma,
                c.lambda,
                c.feasible,
                opt(c.alpha_c),
                opt(c.p0sq),
                opt(c.o_total),
                c.class.map(|k| k.to_string()).unwrap_or_default(),
            ));
        }
        out
    }

    /// Lattice edges separating a supercritical cell from a subcritical cell,
    /// keyed by their two corner vertices (marching-squares style).
    fn interface_edges(&self) -> Vec<[(usize, usize); 2]> {
        let ng = self.gammas.len();
        let nl = self.lambdas.len();
        let mut edges = Vec::new();
        let opposite = |a: Option<BifurcationClass>, b: Option<BifurcationClass>| {
            matches!(
                (a, b),
                (Some(BifurcationClass::Supercritical), Some(BifurcationClass::Subcritical))
                    | (Some(BifurcationClass::Subcritical), Some(BifurcationClass::Supercritical))
            )
        };
        for ig in 0..ng {
            for il in 0..nl {
                let here = self.cell(ig, il).class;
                if il + 1 < nl && opposite(here, self.cell(ig, il + 1).class) {
                    edges.push([(ig, il + 1), (ig + 1, il + 1)]);
                }
                if ig + 1 < ng && opposite(here, self.cell(ig + 1, il).class) {
                    edges.push([(ig + 1, il), (ig + 1, il + 1)]);
                }
            }
        }
        edges
    }

    /// Number of connected components of the supercritical/subcritical
    /// interface, with edges joined through shared lattice vertices.
    pub fn interface_component_count(&self) -> usize {
        let edges = self.interface_edges();
        let mut vert2edges: std::collections::HashMap<(usize, usize), Vec<usize>> =
            std::collections::HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            for v in e {
                vert2edges.entry(*v).or_default().push(i);
            }
        }
        let mut seen = vec![false; edges.len()];
        let mut comps = 0;
        for start in 0..edges.len() {
            if seen[start] {
                continue;
            }
            comps += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(e) = stack.pop() {
                for v in &edges[e] {
                    for &other in &vert2edges[v] {
                        if !seen[other] {
                            seen[other] = true;
                            stack.push(other);
                        }
                    }
                }
            }
        }
        comps
    }

    /// Whether the discrete interface between the supercritical and
    /// subcritical regions forms a single connected curve.
    pub fn boundary_is_connected(&self) -> bool {
        self.interface_component_count() == 1
    }
}
