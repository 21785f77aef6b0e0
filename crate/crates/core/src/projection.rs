//! Marginal integration of fitted surfaces onto single coordinates.
//!
//! For target component `k` the fitted surface `H^(s)` is evaluated with
//! coordinate `k` pinned at `x_k` and the remaining coordinates taken from
//! each design site, then averaged with the weight `w_(-k)`; the indicator
//! `w_k` restricts the result to the estimable range of `X^(k)`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BandwidthSet, Kernel};
use crate::lattice::DesignSet;
use crate::smoother::{ChannelId, Smoother};

/// Quantile levels defining the weight pair from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    /// `[lo, hi]` quantiles of `X^(k)` where `w_k = 1`.
    pub target_quantiles: (f64, f64),
    /// Per-coordinate quantile box of `X^(-k)` supporting `w_(-k)`.
    pub box_quantiles: (f64, f64),
}

impl Default for WeightConfig {
    /// `w_k = 1` on the observed range of `X^(k)`; `w_(-k)` on the
    /// per-coordinate 5%-95% box.
    fn default() -> Self {
        Self {
            target_quantiles: (0.0, 1.0),
            box_quantiles: (0.05, 0.95),
        }
    }
}

impl WeightConfig {
    /// `w_k = 1` only on the central 95% of `X^(k)`.
    pub fn trimmed() -> Self {
        Self {
            target_quantiles: (0.025, 0.975),
            box_quantiles: (0.05, 0.95),
        }
    }

    /// Weights covering the whole sample: `w_k = 1` on the data range and
    /// `w_(-k) = 1` everywhere.
    pub fn full_range() -> Self {
        Self {
            target_quantiles: (0.0, 1.0),
            box_quantiles: (0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("target", self.target_quantiles), ("box", self.box_quantiles)] {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::Validation(format!(
                    "{name} quantiles must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// The weight pair `(w_k, w_(-k))` for one target component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub k: usize,
    /// `w_k = 1` on this closed interval, 0 elsewhere.
    pub target_range: (f64, f64),
    /// Box bounds per coordinate; entry `k` is ignored.
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    /// Height of the raw indicator before normalisation.
    pub height: f64,
    /// Mean raw weight over the design, so that `w_(-k)` averages to one.
    pub normalizer: f64,
}

impl WeightSpec {
    pub fn from_design(design: &DesignSet, k: usize, cfg: &WeightConfig) -> Result<Self> {
        cfg.validate()?;
        if k >= design.p() {
            return Err(Error::DimensionMismatch {
                expected: design.p(),
                actual: k + 1,
            });
        }
        let mut box_lo = Vec::with_capacity(design.p());
        let mut box_hi = Vec::with_capacity(design.p());
        let mut target_range = (0.0, 0.0);
        for l in 0..design.p() {
            let mut col = design.x_column(l);
            col.sort_by(f64::total_cmp);
            if l == k {
                target_range = (
                    quantile_sorted(&col, cfg.target_quantiles.0),
                    quantile_sorted(&col, cfg.target_quantiles.1),
                );
            }
            box_lo.push(quantile_sorted(&col, cfg.box_quantiles.0));
            box_hi.push(quantile_sorted(&col, cfg.box_quantiles.1));
        }
        let mut spec = Self {
            k,
            target_range,
            box_lo,
            box_hi,
            height: 1.0,
            normalizer: 1.0,
        };
        spec.renormalize(design)?;
        Ok(spec)
    }

    /// Rescales the raw indicator height and renormalises.
    pub fn with_height(mut self, height: f64, design: &DesignSet) -> Result<Self> {
        self.height = height;
        self.renormalize(design)?;
        Ok(self)
    }

    fn renormalize(&mut self, design: &DesignSet) -> Result<()> {
        let total: f64 = (0..design.len()).map(|i| self.raw_minus(design.x_row(i))).sum();
        let mean = total / design.len() as f64;
        if !(mean > 0.0) {
            return Err(Error::Validation(format!(
                "weight box for component {} contains no design site",
                self.k
            )));
        }
        self.normalizer = mean;
        Ok(())
    }

    pub fn w_target(&self, x_k: f64) -> f64 {
        if self.target_range.0 <= x_k && x_k <= self.target_range.1 {
            1.0
        } else {
            0.0
        }
    }

    fn raw_minus(&self, x: &[f64]) -> f64 {
        let inside = x
            .iter()
            .enumerate()
            .all(|(l, v)| l == self.k || (self.box_lo[l] <= *v && *v <= self.box_hi[l]));
        if inside {
            self.height
        } else {
            0.0
        }
    }

    /// `w_(-k)` evaluated at a full covariate row (coordinate `k` ignored).
    pub fn w_minus(&self, x: &[f64]) -> f64 {
        self.raw_minus(x) / self.normalizer
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" definition).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One marginal projection value per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    /// `P^(s)_{k,w}(x_k)` for `s = 0..=q`.
    pub values: Vec<f64>,
    /// Sites whose local solve contributed.
    pub n_effective: usize,
}

/// Evaluates marginal projections for one target component.
pub struct Projector<'a> {
    smoother: Smoother<'a>,
    weight: &'a WeightSpec,
    /// Distinct `X^(-k)` rows with positive weight: (row, weight mass, site count).
    groups: Vec<(Vec<f64>, f64, usize)>,
}

impl<'a> Projector<'a> {
    pub fn new(
        design: &'a DesignSet,
        kernel: &'a Kernel,
        bandwidths: &BandwidthSet,
        weight: &'a WeightSpec,
    ) -> Result<Self> {
        if bandwidths.dim() != design.p() {
            return Err(Error::DimensionMismatch {
                expected: design.p(),
                actual: bandwidths.dim(),
            });
        }
        let k = weight.k;
        let smoother = Smoother::new(design, kernel, bandwidths.for_target(k))?;
        let mut groups: Vec<(Vec<f64>, f64, usize)> = Vec::new();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for site in 0..design.len() {
            let row = design.x_row(site);
            let w = weight.w_minus(row);
            if w == 0.0 {
                continue;
            }
            let key: Vec<u64> = row
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != k)
                .map(|(_, v)| v.to_bits())
                .collect();
            match seen.get(&key) {
                Some(&g) => {
                    groups[g].1 += w;
                    groups[g].2 += 1;
                }
                None => {
                    seen.insert(key, groups.len());
                    groups.push((row.to_vec(), w, 1));
                }
            }
        }
        Ok(Self {
            smoother,
            weight,
            groups,
        })
    }

    pub fn k(&self) -> usize {
        self.weight.k
    }

    /// All channels' projections at `x_k`, optionally with one site removed
    /// from every kernel sum.
    pub fn project(&self, x_k: f64, exclude: Option<usize>) -> Result<ProjectedPoint> {
        let channels = self.smoother.design().q() + 1;
        if self.weight.w_target(x_k) == 0.0 {
            return Ok(ProjectedPoint {
                values: vec![0.0; channels],
                n_effective: 0,
            });
        }
        let k = self.weight.k;
        let mut acc = vec![0.0; channels];
        let mut mass = 0.0;
        let mut n_effective = 0;
        let mut point = vec![0.0; self.smoother.design().p()];
        for (row, w, count) in &self.groups {
            point.copy_from_slice(row);
            point[k] = x_k;
            match self.smoother.intercepts(&point, exclude) {
                Ok(h) => {
                    for (a, v) in acc.iter_mut().zip(&h) {
                        *a += w * v;
                    }
                    mass += w;
                    n_effective += count;
                }
                Err(Error::SingularWindow { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        if n_effective == 0 {
            return Err(Error::EmptyProjection { k, x: x_k });
        }
        Ok(ProjectedPoint {
            values: acc.into_iter().map(|v| v / mass).collect(),
            n_effective,
        })
    }

    /// Projections at every abscissa; points with no estimable evaluation
    /// come back as `None`.
    pub fn project_grid(&self, grid: &[f64]) -> Result<Vec<Option<ProjectedPoint>>> {
        grid.par_iter()
            .map(|&x| match self.project(x, None) {
                Ok(pt) => Ok(Some(pt)),
                Err(Error::EmptyProjection { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    }
}

/// `P^(s)_{k,w}(x_k)` for one channel.
pub fn marginal_project(
    design: &DesignSet,
    kernel: &Kernel,
    bandwidths: &BandwidthSet,
    weight: &WeightSpec,
    s: ChannelId,
    x_k: f64,
) -> Result<f64> {
    if s.0 > design.q() {
        return Err(Error::DimensionMismatch {
            expected: design.q() + 1,
            actual: s.0 + 1,
        });
    }
    let proj = Projector::new(design, kernel, bandwidths, weight)?;
    Ok(proj.project(x_k, None)?.values[s.0])
}

/// Which response a curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveChannel {
    Channel(usize),
    /// `P^(0) - beta' P^Z` at a given `beta`.
    Combined,
}

/// A component curve tabulated on an ascending grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCurve {
    pub k: usize,
    pub grid: Vec<f64>,
    /// Current (possibly recentred) values; `None` where not estimable.
    pub values: Vec<Option<f64>>,
    pub n_effective: Vec<usize>,
    pub channel: CurveChannel,
    /// Interval where the uncentred curve may be nonzero (`w_k = 1`).
    pub support: (f64, f64),
    /// Total amount subtracted by recentring.
    pub offset: f64,
}

impl ComponentCurve {
    /// A hand-built curve whose support is the span of its grid.
    pub fn new(k: usize, grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len().max(1),
                actual: values.len(),
            });
        }
        check_ascending(&grid)?;
        let support = (grid[0], grid[grid.len() - 1]);
        let n = grid.len();
        Ok(Self {
            k,
            grid,
            values: values.into_iter().map(Some).collect(),
            n_effective: vec![0; n],
            channel: CurveChannel::Combined,
            support,
            offset: 0.0,
        })
    }

    /// Uncentred estimates (`values + offset`).
    pub fn estimates(&self) -> Vec<Option<f64>> {
        self.values.iter().map(|v| v.map(|v| v + self.offset)).collect()
    }

    /// Curve value at `x`: interpolated inside the support, `-offset`
    /// (the recentred zero of `w_k`) outside it.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        if x < self.support.0 || x > self.support.1 {
            return Ok(-self.offset);
        }
        interpolate(&self.grid, &self.values, x)
    }

    /// Subtracts the mean of the curve over the data abscissas `xs`.
    pub fn recenter_at(&self, xs: &[f64]) -> Result<ComponentCurve> {
        let mut total = 0.0;
        for &x in xs {
            total += self.value_at(x)?;
        }
        let shift = total / xs.len() as f64;
        let mut out = self.clone();
        for v in out.values.iter_mut().flatten() {
            *v -= shift;
        }
        out.offset += shift;
        Ok(out)
    }
}

fn check_ascending(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("curve grid must be finite and strictly ascending".into()));
    }
    Ok(())
}

/// Linear interpolation between the nearest present nodes around `x`;
/// constant past the last present node on either side.
fn interpolate(grid: &[f64], values: &[Option<f64>], x: f64) -> Result<f64> {
    let lo_bound = grid[0];
    let hi_bound = grid[grid.len() - 1];
    let err = || Error::Extrapolation {
        x,
        lo: lo_bound,
        hi: hi_bound,
    };
    if x < lo_bound || x > hi_bound {
        return Err(err());
    }
    let pos = grid.partition_point(|&g| g < x);
    if pos < grid.len() && grid[pos] == x {
        if let Some(v) = values[pos] {
            return Ok(v);
        }
    }
    let left = (0..pos).rev().find(|&i| values[i].is_some());
    let right = (pos..grid.len()).find(|&i| values[i].is_some());
    // flat beyond the outermost estimable node
    let (left, right) = match (left, right) {
        (Some(l), Some(r)) => (l, r),
        (Some(l), None) => (l, l),
        (None, Some(r)) => (r, r),
        (None, None) => return Err(err()),
    };
    let (x0, x1) = (grid[left], grid[right]);
    let (y0, y1) = (values[left].unwrap(), values[right].unwrap());
    if x1 == x0 {
        return Ok(y0);
    }
    let t = (x - x0) / (x1 - x0);
    Ok(y0 + t * (y1 - y0))
}

/// Combined curve `P^(0) - beta' P^Z` on `grid`.
pub fn component_curve(
    design: &DesignSet,
    kernel: &Kernel,
    bandwidths: &BandwidthSet,
    weight: &WeightSpec,
    beta: &[f64],
    grid: &[f64],
) -> Result<ComponentCurve> {
    if beta.len() != design.q() {
        return Err(Error::DimensionMismatch {
            expected: design.q(),
            actual: beta.len(),
        });
    }
    check_ascending(grid)?;
    let proj = Projector::new(design, kernel, bandwidths, weight)?;
    let points = proj.project_grid(grid)?;
    Ok(combine(weight, grid.to_vec(), &points, beta))
}

pub(crate) fn combine(
    weight: &WeightSpec,
    grid: Vec<f64>,
    points: &[Option<ProjectedPoint>],
    beta: &[f64],
) -> ComponentCurve {
    let values = points
        .iter()
        .map(|pt| {
            pt.as_ref().map(|pt| {
                pt.values[0] - beta.iter().zip(&pt.values[1..]).map(|(b, v)| b * v).sum::<f64>()
            })
        })
        .collect();
    let n_effective = points.iter().map(|pt| pt.as_ref().map_or(0, |p| p.n_effective)).collect();
    ComponentCurve {
        k: weight.k,
        grid,
        values,
        n_effective,
        channel: CurveChannel::Combined,
        support: weight.target_range,
        offset: 0.0,
    }
}

pub(crate) fn single_channel(
    weight: &WeightSpec,
    grid: Vec<f64>,
    points: &[Option<ProjectedPoint>],
    s: usize,
) -> ComponentCurve {
    ComponentCurve {
        k: weight.k,
        values: points.iter().map(|pt| pt.as_ref().map(|p| p.values[s])).collect(),
        n_effective: points.iter().map(|pt| pt.as_ref().map_or(0, |p| p.n_effective)).collect(),
        grid,
        channel: CurveChannel::Channel(s),
        support: weight.target_range,
        offset: 0.0,
    }
}

/// Subtracts the curve's mean over the design's `X^(k)` values.
pub fn recenter(curve: &ComponentCurve, design: &DesignSet) -> Result<ComponentCurve> {
    curve.recenter_at(&design.x_column(curve.k))
}

/// `n` equally spaced points spanning `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || lo == hi {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}
