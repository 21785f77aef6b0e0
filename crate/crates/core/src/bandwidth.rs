//! Leave-one-out cross-validation over a bandwidth grid.
//!
//! The held-out site is removed from every kernel sum. Centring, the weight
//! pairs, `beta_hat` and the curve offsets stay at their full-sample values.
//! Only sites where every `w_k` is 1 and every coordinate lies inside the
//! weight box are scored, so all candidates share one scoring set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BandwidthSet, Kernel};
use crate::lattice::DesignSet;
use crate::plm::{fit, FitOptions};
use crate::projection::{Projector, WeightSpec};

/// Which model's prediction error is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvTarget {
    /// Purely additive: the linear covariates are ignored.
    Additive,
    PartiallyLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub candidates: Vec<BandwidthSet>,
    /// Mean squared leave-one-out error; `None` when the candidate could not
    /// predict every scored site.
    pub scores: Vec<Option<f64>>,
    /// Index of the selected candidate.
    pub selected: usize,
    /// Indices whose score ties the minimum.
    pub ties: Vec<usize>,
    pub target: CvTarget,
}

impl CvReport {
    pub fn selected_bandwidths(&self) -> &BandwidthSet {
        &self.candidates[self.selected]
    }

    pub fn selected_score(&self) -> f64 {
        self.scores[self.selected].expect("selected candidate has a finite score")
    }
}

fn additive_design(design: &DesignSet) -> Result<DesignSet> {
    let n = design.len();
    DesignSet::from_rows(
        design.sites().to_vec(),
        design.y().to_vec(),
        (0..n).map(|i| design.x_row(i).to_vec()).collect(),
        vec![Vec::new(); n],
    )
}

/// Leave-one-out predictions of `Y~` per site; `None` for sites outside
/// the scoring set.
pub fn loo_predictions(
    design: &DesignSet,
    kernel: &Kernel,
    bandwidths: &BandwidthSet,
    target: CvTarget,
    opts: &FitOptions,
) -> Result<Vec<Option<f64>>> {
    let owned;
    let d = match target {
        CvTarget::Additive if design.q() > 0 => {
            owned = additive_design(design)?;
            &owned
        }
        _ => design,
    };
    let full = fit(d, kernel, bandwidths, opts)?;
    let projectors = full
        .weights
        .iter()
        .map(|w| Projector::new(d, kernel, bandwidths, w))
        .collect::<Result<Vec<_>>>()?;
    let beta = &full.beta_hat;
    (0..d.len())
        .into_par_iter()
        .map(|i| {
            let x = d.x_row(i);
            if !scored(&full.weights, x) {
                return Ok(None);
            }
            let mut pred: f64 = d.z_tilde_row(i).iter().zip(beta).map(|(z, b)| z * b).sum();
            for (proj, curve) in projectors.iter().zip(&full.curves) {
                let v = proj.project(x[proj.k()], Some(i))?.values;
                let combined = v[0] - beta.iter().zip(&v[1..]).map(|(b, p)| b * p).sum::<f64>();
                pred += combined - curve.offset;
            }
            Ok(Some(pred))
        })
        .collect()
}

fn scored(weights: &[WeightSpec], x: &[f64]) -> bool {
    weights.iter().all(|w| {
        w.w_target(x[w.k]) > 0.0 && x.iter().enumerate().all(|(l, v)| w.box_lo[l] <= *v && *v <= w.box_hi[l])
    })
}

fn score(design: &DesignSet, kernel: &Kernel, b: &BandwidthSet, target: CvTarget, opts: &FitOptions) -> Result<Option<f64>> {
    let preds = match loo_predictions(design, kernel, b, target, opts) {
        Ok(p) => p,
        Err(e) if e.is_input_error() => return Err(e),
        Err(_) => return Ok(None),
    };
    let (mut total, mut count) = (0.0, 0usize);
    for (pred, y) in preds.iter().zip(design.y_tilde()) {
        if let Some(p) = pred {
            total += (y - p).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(None);
    }
    let s = total / count as f64;
    Ok(s.is_finite().then_some(s))
}

/// Scores every candidate and selects the minimiser; near-ties go to the
/// smallest bandwidth product, then to the lexicographically smallest vector.
pub fn cross_validate(
    design: &DesignSet,
    kernel: &Kernel,
    candidates: &[BandwidthSet],
    target: CvTarget,
    opts: &FitOptions,
) -> Result<CvReport> {
    if candidates.is_empty() {
        return Err(Error::Validation("no bandwidth candidates".into()));
    }
    for c in candidates {
        if c.dim() != design.p() {
            return Err(Error::DimensionMismatch {
                expected: design.p(),
                actual: c.dim(),
            });
        }
    }
    let scores = candidates
        .iter()
        .map(|b| score(design, kernel, b, target, opts))
        .collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NoFiniteScores);
    }
    let tol = 1e-9 * best + 1e-12 * design.y_variance();
    let ties: Vec<usize> = (0..candidates.len())
        .filter(|&i| scores[i].is_some_and(|s| s - best <= tol))
        .collect();
    let selected = *ties
        .iter()
        .min_by(|&&a, &&b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            ca.product()
                .total_cmp(&cb.product())
                .then_with(|| {
                    ca.values()
                        .iter()
                        .zip(cb.values())
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .then(a.cmp(&b))
        })
        .expect("at least one tie");
    Ok(CvReport {
        candidates: candidates.to_vec(),
        scores,
        selected,
        ties,
        target,
    })
}
