//! Product-kernel local linear regression at a point.
//!
//! For an evaluation point `x0` the smoother forms the kernel-weighted moment
//! matrix `U` over the standardised offsets `((X - x0) / b)` (with a leading
//! constant coordinate) and one right-hand side per response channel:
//! channel 0 is the centred response `Y - Ybar`, channel `s >= 1` is the
//! centred linear covariate `Z^(s) - Zbar^(s)`. All channels share `U`, so a
//! single factorisation yields every channel's intercept `H^(s)(x0)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{product_kernel_unchecked, Kernel};
use crate::lattice::DesignSet;
use crate::linalg::SymSolver;

/// Local systems with a condition number above this are declared singular.
pub const MAX_CONDITION: f64 = 1e10;

/// Response channel: `0` is `Y`, `s >= 1` is the `s`-th linear covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelId(pub usize);

impl ChannelId {
    pub const Y: ChannelId = ChannelId(0);
}

/// The `(p+1) x (p+1)` moment matrix and per-channel right-hand sides at `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSystem {
    pub u_mat: DMatrix<f64>,
    /// `(p+1) x (q+1)`; column `s` is channel `s`.
    pub v: DMatrix<f64>,
    pub x0: Vec<f64>,
    pub bandwidths: Vec<f64>,
    /// The common factor `1 / (N b_pi)`.
    pub scale: f64,
}

/// Solution of a local system for every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    /// `(p+1) x (q+1)`; row 0 holds the intercepts, rows `1..=p` the
    /// bandwidth-scaled slopes `a1 * b`.
    coef: DMatrix<f64>,
    bandwidths: Vec<f64>,
}

impl LocalSolution {
    pub fn intercept(&self, s: ChannelId) -> f64 {
        self.coef[(0, s.0)]
    }

    pub fn intercepts(&self) -> Vec<f64> {
        self.coef.row(0).iter().copied().collect()
    }

    /// Slope vector `a1` of channel `s`, in the covariates' own units.
    pub fn slope(&self, s: ChannelId) -> Vec<f64> {
        self.bandwidths
            .iter()
            .enumerate()
            .map(|(l, b)| self.coef[(l + 1, s.0)] / b)
            .collect()
    }
}

impl LocalSystem {
    pub fn solve(&self) -> Result<LocalSolution> {
        let solver = SymSolver::new(&self.u_mat);
        let condition = solver.condition();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularWindow {
                x0: self.x0.clone(),
                condition,
            });
        }
        Ok(LocalSolution {
            coef: solver.solve(&self.v),
            bandwidths: self.bandwidths.clone(),
        })
    }
}

/// Sites bucketed on a grid over the first one or two covariates, with
/// cells at least as wide as the kernel reach, for window queries.
#[derive(Debug, Clone)]
struct SiteIndex {
    dims: usize,
    origin: [f64; 2],
    cell: [f64; 2],
    shape: [usize; 2],
    cells: Vec<Vec<usize>>,
}

/// Cap on cells per axis, so tiny bandwidths do not explode the index.
const MAX_CELLS_PER_AXIS: f64 = 256.0;

impl SiteIndex {
    fn new(design: &DesignSet, reach: &[f64]) -> Self {
        let dims = design.p().min(2);
        let mut origin = [0.0; 2];
        let mut cell = [1.0; 2];
        let mut shape = [1usize; 2];
        for l in 0..dims {
            let col = design.x_column(l);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            let width = reach[l].max(span / MAX_CELLS_PER_AXIS);
            origin[l] = lo;
            cell[l] = if width > 0.0 { width } else { 1.0 };
            shape[l] = (span / cell[l]).floor() as usize + 1;
        }
        let mut cells = vec![Vec::new(); shape[0] * shape[1]];
        let mut index = Self {
            dims,
            origin,
            cell,
            shape,
            cells: Vec::new(),
        };
        for site in 0..design.len() {
            let x = design.x_row(site);
            let c0 = index.coord(0, x[0]);
            let c1 = if dims > 1 { index.coord(1, x[1]) } else { 0 };
            cells[c0 * shape[1] + c1].push(site);
        }
        index.cells = cells;
        index
    }

    fn coord(&self, l: usize, v: f64) -> usize {
        let c = ((v - self.origin[l]) / self.cell[l]).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.shape[l] - 1)
        }
    }

    /// Cell range on axis `l` overlapping `[x - r, x + r]`, or `None` when
    /// the window misses the data.
    fn span(&self, l: usize, x: f64, r: f64) -> Option<(usize, usize)> {
        if l >= self.dims {
            return Some((0, 0));
        }
        let lo = ((x - r - self.origin[l]) / self.cell[l]).floor();
        let hi = ((x + r - self.origin[l]) / self.cell[l]).floor();
        if hi < 0.0 || lo > (self.shape[l] - 1) as f64 {
            return None;
        }
        Some((lo.max(0.0) as usize, (hi as usize).min(self.shape[l] - 1)))
    }

    /// Calls `f` for every site in cells overlapping the window around `x0`.
    fn for_each(&self, x0: &[f64], reach: &[f64], mut f: impl FnMut(usize)) {
        let Some((a0, a1)) = self.span(0, x0[0], reach[0]) else {
            return;
        };
        let Some((b0, b1)) = self.span(1, x0.get(1).copied().unwrap_or(0.0), reach.get(1).copied().unwrap_or(0.0))
        else {
            return;
        };
        for a in a0..=a1 {
            for b in b0..=b1 {
                for &site in &self.cells[a * self.shape[1] + b] {
                    f(site);
                }
            }
        }
    }
}

/// Local linear smoother bound to one design, kernel and bandwidth vector.
#[derive(Debug, Clone)]
pub struct Smoother<'a> {
    design: &'a DesignSet,
    kernel: &'a Kernel,
    b: Vec<f64>,
    scale: f64,
    reach: Vec<f64>,
    index: SiteIndex,
}

impl<'a> Smoother<'a> {
    pub fn new(design: &'a DesignSet, kernel: &'a Kernel, b: &[f64]) -> Result<Self> {
        if b.len() != design.p() {
            return Err(Error::DimensionMismatch {
                expected: design.p(),
                actual: b.len(),
            });
        }
        if design.is_empty() {
            return Err(Error::Validation("design has no sites".into()));
        }
        if b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Validation("bandwidths must be positive".into()));
        }
        let b_pi: f64 = b.iter().product();
        let reach: Vec<f64> = b.iter().map(|v| v * kernel.radius()).collect();
        Ok(Self {
            design,
            kernel,
            b: b.to_vec(),
            scale: 1.0 / (design.len() as f64 * b_pi),
            index: SiteIndex::new(design, &reach),
            reach,
        })
    }

    pub fn design(&self) -> &DesignSet {
        self.design
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.b
    }

    pub fn assemble(&self, x0: &[f64]) -> LocalSystem {
        self.assemble_excluding(x0, None)
    }

    /// Local system with site `exclude` (if any) dropped from every kernel sum.
    pub fn assemble_excluding(&self, x0: &[f64], exclude: Option<usize>) -> LocalSystem {
        let p = self.design.p();
        let channels = self.design.q() + 1;
        let dim = p + 1;
        let mut u = vec![0.0; dim * dim];
        let mut v = vec![0.0; dim * channels];
        let mut xs = vec![0.0; dim];
        self.index.for_each(x0, &self.reach, |site| {
            if Some(site) == exclude {
                return;
            }
            let row = self.design.x_row(site);
            let w = product_kernel_unchecked(self.kernel, &self.b, row, x0);
            if w == 0.0 {
                return;
            }
            xs[0] = 1.0;
            for l in 0..p {
                xs[l + 1] = (row[l] - x0[l]) / self.b[l];
            }
            for a in 0..dim {
                let wa = w * xs[a];
                for c in a..dim {
                    u[a * dim + c] += wa * xs[c];
                }
                for s in 0..channels {
                    v[a * channels + s] += wa * self.design.channel_value(site, s);
                }
            }
        });
        let mut u_mat = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for c in a..dim {
                let val = u[a * dim + c] * self.scale;
                u_mat[(a, c)] = val;
                u_mat[(c, a)] = val;
            }
        }
        let v = DMatrix::from_row_slice(dim, channels, &v) * self.scale;
        LocalSystem {
            u_mat,
            v,
            x0: x0.to_vec(),
            bandwidths: self.b.clone(),
            scale: self.scale,
        }
    }

    pub fn solve_at(&self, x0: &[f64]) -> Result<LocalSolution> {
        self.assemble(x0).solve()
    }

    /// Intercepts `H^(s)(x0)` of every channel.
    pub fn intercepts(&self, x0: &[f64], exclude: Option<usize>) -> Result<Vec<f64>> {
        Ok(self.assemble_excluding(x0, exclude).solve()?.intercepts())
    }

    /// `H^(0)(x0) - beta' H(x0)`: the local linear estimate of `g(x0, beta)`.
    pub fn g_hat(&self, x0: &[f64], beta: &[f64]) -> Result<f64> {
        if beta.len() != self.design.q() {
            return Err(Error::DimensionMismatch {
                expected: self.design.q(),
                actual: beta.len(),
            });
        }
        let h = self.intercepts(x0, None)?;
        Ok(h[0] - beta.iter().zip(&h[1..]).map(|(b, v)| b * v).sum::<f64>())
    }
}

fn check_point(design: &DesignSet, x0: &[f64]) -> Result<()> {
    if x0.len() != design.p() {
        return Err(Error::DimensionMismatch {
            expected: design.p(),
            actual: x0.len(),
        });
    }
    Ok(())
}

/// Builds the local system at `x0`.
pub fn assemble(design: &DesignSet, kernel: &Kernel, b: &[f64], x0: &[f64]) -> Result<LocalSystem> {
    check_point(design, x0)?;
    Ok(Smoother::new(design, kernel, b)?.assemble(x0))
}

/// Intercept and slope of channel `s` at the system's evaluation point.
pub fn solve_channel(sys: &LocalSystem, s: ChannelId) -> Result<(f64, Vec<f64>)> {
    if s.0 >= sys.v.ncols() {
        return Err(Error::DimensionMismatch {
            expected: sys.v.ncols(),
            actual: s.0 + 1,
        });
    }
    let sol = sys.solve()?;
    Ok((sol.intercept(s), sol.slope(s)))
}

/// `g_hat(x0, beta) = H^(0)(x0) - beta' H(x0)`.
pub fn g_hat(design: &DesignSet, kernel: &Kernel, b: &[f64], x0: &[f64], beta: &[f64]) -> Result<f64> {
    check_point(design, x0)?;
    Smoother::new(design, kernel, b)?.g_hat(x0, beta)
}
