//! Gibbs sampling of the first-order auto-normal lattice scheme
//! `Y_ij | rest ~ N(g0 + g1 (Y_(i-1,j) + Y_(i+1,j)) + g2 (Y_(i,j-1) + Y_(i,j+1)), s2)`.
//!
//! Boundaries are free: neighbours outside the grid are simply absent from
//! the conditional mean. Replicate `r` is an independent chain driven by a
//! ChaCha8 generator seeded with the configured seed on stream `r`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoNormalParams {
    pub gamma0: f64,
    /// Coefficient on the vertical neighbour pair.
    pub gamma1: f64,
    /// Coefficient on the horizontal neighbour pair.
    pub gamma2: f64,
    pub sigma2: f64,
    /// Skip the `2|g1| + 2|g2| < 1` check.
    #[serde(default)]
    pub allow_nonstationary: bool,
}

impl AutoNormalParams {
    pub fn new(gamma0: f64, gamma1: f64, gamma2: f64, sigma2: f64) -> Result<Self> {
        let p = Self {
            gamma0,
            gamma1,
            gamma2,
            sigma2,
            allow_nonstationary: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.gamma0, self.gamma1, self.gamma2, self.sigma2].iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("auto-normal parameters must be finite".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Validation(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        let margin = 2.0 * self.gamma1.abs() + 2.0 * self.gamma2.abs();
        if !self.allow_nonstationary && margin >= 1.0 {
            return Err(Error::Validation(format!(
                "2|gamma1| + 2|gamma2| = {margin} must be below 1"
            )));
        }
        Ok(())
    }

    /// `g0 / (1 - 2 g1 - 2 g2)`, the mean of the infinite-lattice process.
    pub fn stationary_mean(&self) -> f64 {
        self.gamma0 / (1.0 - 2.0 * self.gamma1 - 2.0 * self.gamma2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitField {
    Zeros,
    StationaryMean,
    Given(LatticeField),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    Raster,
    /// All sites with even `i + j`, then all with odd `i + j`.
    Checkerboard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub burn_in: usize,
    /// Sweeps after burn-in before the field is retained.
    pub thin: usize,
    pub seed: u64,
    pub init: InitField,
    pub sweep_order: SweepOrder,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            burn_in: 500,
            thin: 50,
            seed: 0,
            init: InitField::StationaryMean,
            sweep_order: SweepOrder::Raster,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Validation("thin must be at least 1".into()));
        }
        Ok(())
    }
}

fn sweep_site(y: &mut [f64], rows: usize, cols: usize, i: usize, j: usize, p: &AutoNormalParams, sd: f64, rng: &mut ChaCha8Rng) {
    let at = |r: usize, c: usize| r * cols + c;
    let mut vert = 0.0;
    if i > 0 {
        vert += y[at(i - 1, j)];
    }
    if i + 1 < rows {
        vert += y[at(i + 1, j)];
    }
    let mut horiz = 0.0;
    if j > 0 {
        horiz += y[at(i, j - 1)];
    }
    if j + 1 < cols {
        horiz += y[at(i, j + 1)];
    }
    let mean = p.gamma0 + p.gamma1 * vert + p.gamma2 * horiz;
    let z: f64 = StandardNormal.sample(rng);
    y[at(i, j)] = mean + sd * z;
}

fn sweep(y: &mut [f64], rows: usize, cols: usize, p: &AutoNormalParams, order: SweepOrder, rng: &mut ChaCha8Rng) {
    let sd = p.sigma2.sqrt();
    match order {
        SweepOrder::Raster => {
            for i in 0..rows {
                for j in 0..cols {
                    sweep_site(y, rows, cols, i, j, p, sd, rng);
                }
            }
        }
        SweepOrder::Checkerboard => {
            for colour in 0..2 {
                for i in 0..rows {
                    for j in ((i + colour) % 2..cols).step_by(2) {
                        sweep_site(y, rows, cols, i, j, p, sd, rng);
                    }
                }
            }
        }
    }
}

/// One chain: `burn_in + thin` sweeps from the initial field.
pub fn run_chain(params: &AutoNormalParams, rows: usize, cols: usize, cfg: &GibbsConfig, stream: u64) -> Result<LatticeField> {
    let mut y = match &cfg.init {
        InitField::Zeros => vec![0.0; rows * cols],
        InitField::StationaryMean => vec![params.stationary_mean(); rows * cols],
        InitField::Given(f) => {
            if f.rows() != rows || f.cols() != cols {
                return Err(Error::Validation(format!(
                    "initial field is {}x{}, expected {rows}x{cols}",
                    f.rows(),
                    f.cols()
                )));
            }
            f.values().to_vec()
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    for _ in 0..cfg.burn_in + cfg.thin {
        sweep(&mut y, rows, cols, params, cfg.sweep_order, &mut rng);
    }
    LatticeField::new(rows, cols, y)
}

/// `replicates` independent fields on an `rows x cols` grid.
pub fn simulate(params: &AutoNormalParams, rows: usize, cols: usize, cfg: &GibbsConfig, replicates: usize) -> Result<Vec<LatticeField>> {
    params.validate()?;
    cfg.validate()?;
    if rows < 3 || cols < 3 {
        return Err(Error::Validation(format!("grid must be at least 3x3, got {rows}x{cols}")));
    }
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| run_chain(params, rows, cols, cfg, r))
        .collect()
}
