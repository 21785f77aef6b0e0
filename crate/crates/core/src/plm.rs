//! The partially linear fit.
//!
//! Per-channel projections are tabulated on a grid for every component and
//! evaluated at each site's own covariates to form
//! `Y* = Y~ - sum_l P^(0)_l(X^(l))` and `Z* = Z~ - sum_l P^Z_l(X^(l))`;
//! `beta` is the least-squares coefficient of `Y*` on `Z*`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BandwidthSet, Kernel};
use crate::lattice::{mean, population_variance, DesignSet};
use crate::linalg::SymSolver;
use crate::projection::{
    combine, linspace, recenter, single_channel, ComponentCurve, ProjectedPoint, Projector,
    WeightConfig, WeightSpec,
};
use crate::smoother::MAX_CONDITION;

/// Abscissas at which component projections are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveGrid {
    /// Equally spaced points spanning the `w_k` support; sites are
    /// interpolated linearly.
    Dense(usize),
    /// The distinct data values of `X^(k)` inside the support; no
    /// interpolation error at the sites.
    Exact,
}

impl Default for CurveGrid {
    fn default() -> Self {
        CurveGrid::Dense(101)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub grid: CurveGrid,
    pub weights: WeightConfig,
    /// Centre each channel's projection at the sites before forming `Y*`
    /// and `Z*`.
    pub center_channels: bool,
}

/// Result of [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmFit {
    pub beta_hat: Vec<f64>,
    pub mu_hat: f64,
    /// Recentred `g_k` curves, one per component.
    pub curves: Vec<ComponentCurve>,
    pub y_star: Vec<f64>,
    pub z_star: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    /// `Z~' beta` per site.
    pub linear_part: Vec<Vec<f64>>,
    /// `g_k(X^(k))` per site, one vector per component.
    pub component_values: Vec<Vec<f64>>,
    pub sites: Vec<(usize, usize)>,
    pub bandwidths: BandwidthSet,
    pub kernel: Kernel,
    pub weights: Vec<WeightSpec>,
    pub options: FitOptions,
}

impl PlmFit {
    pub fn q(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn p(&self) -> usize {
        self.curves.len()
    }

    /// `(1/N) sum Z* Z*'`.
    pub fn gram(&self) -> DMatrix<f64> {
        gram(&self.z_star, self.q())
    }
}

fn gram(z_star: &[Vec<f64>], q: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(q, q);
    for z in z_star {
        for a in 0..q {
            for b in 0..q {
                g[(a, b)] += z[a] * z[b];
            }
        }
    }
    g / z_star.len() as f64
}

/// Fits the model with weights derived from `opts.weights`.
pub fn fit(design: &DesignSet, kernel: &Kernel, bandwidths: &BandwidthSet, opts: &FitOptions) -> Result<PlmFit> {
    let weights = (0..design.p())
        .map(|k| WeightSpec::from_design(design, k, &opts.weights))
        .collect::<Result<Vec<_>>>()?;
    fit_with_weights(design, kernel, bandwidths, &weights, opts)
}

/// Tabulated projections for one component.
pub(crate) struct ComponentTable {
    pub grid: Vec<f64>,
    pub points: Vec<Option<ProjectedPoint>>,
}

pub(crate) fn component_grid(design: &DesignSet, weight: &WeightSpec, grid: CurveGrid) -> Result<Vec<f64>> {
    let (lo, hi) = weight.target_range;
    match grid {
        CurveGrid::Dense(n) => {
            if n < 2 {
                return Err(Error::Validation("dense curve grid needs at least 2 points".into()));
            }
            Ok(linspace(lo, hi, n))
        }
        CurveGrid::Exact => {
            let mut xs: Vec<f64> = design
                .x_column(weight.k)
                .into_iter()
                .filter(|x| lo <= *x && *x <= hi)
                .collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            Ok(xs)
        }
    }
}

pub(crate) fn tabulate(
    design: &DesignSet,
    kernel: &Kernel,
    bandwidths: &BandwidthSet,
    weight: &WeightSpec,
    grid: CurveGrid,
) -> Result<ComponentTable> {
    let grid = component_grid(design, weight, grid)?;
    let projector = Projector::new(design, kernel, bandwidths, weight)?;
    let points = projector.project_grid(&grid)?;
    if points.iter().all(Option::is_none) {
        return Err(Error::EmptyProjection {
            k: weight.k,
            x: grid[0],
        });
    }
    Ok(ComponentTable { grid, points })
}

/// Fits the model with explicit weight pairs, one per component.
pub fn fit_with_weights(
    design: &DesignSet,
    kernel: &Kernel,
    bandwidths: &BandwidthSet,
    weights: &[WeightSpec],
    opts: &FitOptions,
) -> Result<PlmFit> {
    let (p, q, n) = (design.p(), design.q(), design.len());
    if weights.len() != p || weights.iter().enumerate().any(|(k, w)| w.k != k) {
        return Err(Error::Validation("need one weight pair per component, in order".into()));
    }
    if bandwidths.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: bandwidths.dim(),
        });
    }

    let tables = weights
        .iter()
        .map(|w| tabulate(design, kernel, bandwidths, w, opts.grid))
        .collect::<Result<Vec<_>>>()?;

    let mut y_star = design.y_tilde().to_vec();
    let mut z_star: Vec<Vec<f64>> = (0..n).map(|i| design.z_tilde_row(i).to_vec()).collect();
    for (w, table) in weights.iter().zip(&tables) {
        let xs = design.x_column(w.k);
        for s in 0..=q {
            let curve = single_channel(w, table.grid.clone(), &table.points, s);
            let mut at_sites = xs.iter().map(|&x| curve.value_at(x)).collect::<Result<Vec<_>>>()?;
            if opts.center_channels {
                let c = mean(&at_sites);
                at_sites.iter_mut().for_each(|v| *v -= c);
            }
            for (i, v) in at_sites.into_iter().enumerate() {
                if s == 0 {
                    y_star[i] -= v;
                } else {
                    z_star[i][s - 1] -= v;
                }
            }
        }
    }

    let beta_hat = if q == 0 {
        Vec::new()
    } else {
        let g = gram(&z_star, q);
        let solver = SymSolver::new(&g);
        let condition = solver.condition();
        if !(condition < MAX_CONDITION) {
            let dir = solver.weakest_direction();
            let components = (0..q).filter(|&s| dir[s].abs() >= 0.1).collect();
            return Err(Error::CollinearDesign { components, condition });
        }
        let mut rhs = DMatrix::zeros(q, 1);
        for (z, y) in z_star.iter().zip(&y_star) {
            for s in 0..q {
                rhs[(s, 0)] += z[s] * y;
            }
        }
        let rhs = rhs / n as f64;
        solver.solve(&rhs).column(0).iter().copied().collect()
    };
    let mu_hat = design.y_bar() - dot(&beta_hat, design.z_bar());

    let mut curves = Vec::with_capacity(p);
    let mut component_values = Vec::with_capacity(p);
    for (w, table) in weights.iter().zip(&tables) {
        let raw = combine(w, table.grid.clone(), &table.points, &beta_hat);
        let curve = recenter(&raw, design)?;
        let vals = design
            .x_column(w.k)
            .iter()
            .map(|&x| curve.value_at(x))
            .collect::<Result<Vec<_>>>()?;
        curves.push(curve);
        component_values.push(vals);
    }

    let mut linear_part = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for i in 0..n {
        let zt = design.z_tilde_row(i);
        let parts: Vec<f64> = zt.iter().zip(&beta_hat).map(|(z, b)| z * b).collect();
        let g: f64 = component_values.iter().map(|c| c[i]).sum();
        residuals.push(design.y_tilde()[i] - parts.iter().sum::<f64>() - g);
        linear_part.push(parts);
    }

    Ok(PlmFit {
        beta_hat,
        mu_hat,
        curves,
        y_star,
        z_star,
        residuals,
        linear_part,
        component_values,
        sites: design.sites().to_vec(),
        bandwidths: bandwidths.clone(),
        kernel: kernel.clone(),
        weights: weights.to_vec(),
        options: *opts,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Population variance of the residuals.
pub fn residual_variance(fit: &PlmFit) -> f64 {
    population_variance(&fit.residuals)
}

/// Variance of each additive piece of the fitted mean over the sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentVariances {
    /// `Var(beta_s Z~^(s))` per linear covariate.
    pub linear: Vec<f64>,
    /// `Var(g_k(X^(k)))` per nonparametric component.
    pub nonparametric: Vec<f64>,
    /// Variance of the response itself.
    pub response: f64,
}

pub fn component_variances(fit: &PlmFit, design: &DesignSet) -> ComponentVariances {
    let q = fit.q();
    let linear = (0..q)
        .map(|s| {
            let col: Vec<f64> = fit.linear_part.iter().map(|r| r[s]).collect();
            population_variance(&col)
        })
        .collect();
    let nonparametric = fit.component_values.iter().map(|v| population_variance(v)).collect();
    ComponentVariances {
        linear,
        nonparametric,
        response: design.y_variance(),
    }
}
