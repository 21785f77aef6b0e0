//! Covariance of `beta_hat`, Wald tests, and the kernel linearity statistic.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::kernel::{product_kernel_unchecked, Kernel};
use crate::lattice::DesignSet;
use crate::linalg::SymSolver;
use crate::plm::PlmFit;
use crate::smoother::MAX_CONDITION;

/// Which model the lag covariances assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelForm {
    /// General `g(X)`: scores are centred by their mean.
    General,
    /// Additive `g`: scores have mean zero and are used uncentred.
    Additive,
}

/// Lag truncation `|i| <= rows`, `|j| <= cols`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagBounds {
    pub rows: usize,
    pub cols: usize,
}

impl LagBounds {
    /// `floor(m^(1/3))`, `floor(n^(1/3))` for an `m x n` site rectangle.
    pub fn default_for(extent: (usize, usize)) -> Self {
        Self {
            rows: cube_root_floor(extent.0),
            cols: cube_root_floor(extent.1),
        }
    }
}

fn cube_root_floor(n: usize) -> usize {
    let mut r = (n as f64).cbrt().round() as usize;
    while r * r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Row and column extent of a site set.
pub fn site_extent(sites: &[(usize, usize)]) -> (usize, usize) {
    let (r0, r1) = sites.iter().fold((usize::MAX, 0), |(a, b), s| (a.min(s.0), b.max(s.0)));
    let (c0, c1) = sites.iter().fold((usize::MAX, 0), |(a, b), s| (a.min(s.1), b.max(s.1)));
    (r1 - r0 + 1, c1 - c0 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Taper {
    /// Every lag in the window counts fully.
    #[default]
    None,
    /// Product Bartlett weights `(1 - |i|/(M+1)) (1 - |j|/(N+1))`.
    Bartlett,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub b_zz: DMatrix<f64>,
    pub mu_b: DVector<f64>,
    pub sigma_b: DMatrix<f64>,
    pub mu_beta: DVector<f64>,
    pub sigma_beta: DMatrix<f64>,
    pub lag_bounds: LagBounds,
    pub form: ModelForm,
    pub taper: Taper,
    pub n_sites: usize,
}

/// `R_ij = Z*_ij (Y*_ij - Z*_ij' beta)` per site.
pub fn scores(fit: &PlmFit) -> Vec<Vec<f64>> {
    fit.z_star
        .iter()
        .zip(&fit.y_star)
        .map(|(z, y)| {
            let e = y - z.iter().zip(&fit.beta_hat).map(|(a, b)| a * b).sum::<f64>();
            z.iter().map(|v| v * e).collect()
        })
        .collect()
}

/// Sum of lag cross-covariance matrices `gamma_ij` over the truncation window.
///
/// `gamma_ij = (1/N) sum_(u,v) (R_uv - c)(R_(u+i,v+j) - c)'` over pairs of
/// sites both present; `c` is the score mean under [`ModelForm::General`]
/// and zero otherwise.
pub fn lag_covariance_sum(
    sites: &[(usize, usize)],
    r: &[Vec<f64>],
    lags: LagBounds,
    form: ModelForm,
    taper: Taper,
) -> Result<DMatrix<f64>> {
    let n = sites.len();
    if n == 0 || r.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: r.len(),
        });
    }
    let (m_ext, n_ext) = site_extent(sites);
    if lags.rows >= m_ext || lags.cols >= n_ext {
        return Err(Error::Validation(format!(
            "lag bounds ({}, {}) must be smaller than the site extent ({m_ext}, {n_ext})",
            lags.rows, lags.cols
        )));
    }
    let q = r[0].len();
    let centre: Vec<f64> = match form {
        ModelForm::General => (0..q).map(|s| r.iter().map(|v| v[s]).sum::<f64>() / n as f64).collect(),
        ModelForm::Additive => vec![0.0; q],
    };
    let c: Vec<Vec<f64>> = r
        .iter()
        .map(|v| v.iter().zip(&centre).map(|(a, b)| a - b).collect())
        .collect();
    let index: HashMap<(usize, usize), usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();

    let gamma = |di: isize, dj: isize| -> DMatrix<f64> {
        let mut g = DMatrix::zeros(q, q);
        for (a, &(u, v)) in sites.iter().enumerate() {
            let target = (u as isize + di, v as isize + dj);
            if target.0 < 0 || target.1 < 0 {
                continue;
            }
            if let Some(&b) = index.get(&(target.0 as usize, target.1 as usize)) {
                for s in 0..q {
                    for t in 0..q {
                        g[(s, t)] += c[a][s] * c[b][t];
                    }
                }
            }
        }
        g / n as f64
    };
    let weight = |di: isize, dj: isize| -> f64 {
        match taper {
            Taper::None => 1.0,
            Taper::Bartlett => {
                (1.0 - di.unsigned_abs() as f64 / (lags.rows + 1) as f64)
                    * (1.0 - dj.unsigned_abs() as f64 / (lags.cols + 1) as f64)
            }
        }
    };

    let mut total = gamma(0, 0);
    let (mi, nj) = (lags.rows as isize, lags.cols as isize);
    for di in 0..=mi {
        for dj in -nj..=nj {
            // one representative per +/- pair; the mirror lag is its transpose
            if di == 0 && dj <= 0 {
                continue;
            }
            let g = gamma(di, dj) * weight(di, dj);
            total += &g + g.transpose();
        }
    }
    Ok(total)
}

pub fn estimate_covariance(fit: &PlmFit, lags: LagBounds, form: ModelForm) -> Result<InferenceResult> {
    estimate_covariance_with(fit, lags, form, Taper::None)
}

pub fn estimate_covariance_with(fit: &PlmFit, lags: LagBounds, form: ModelForm, taper: Taper) -> Result<InferenceResult> {
    let q = fit.q();
    if q == 0 {
        return Err(Error::Validation("model has no linear part to test".into()));
    }
    let n = fit.sites.len();
    let r = scores(fit);
    let b_zz = fit.gram();
    let solver = SymSolver::new(&b_zz);
    let condition = solver.condition();
    if !(condition < MAX_CONDITION) {
        let dir = solver.weakest_direction();
        return Err(Error::CollinearDesign {
            components: (0..q).filter(|&s| dir[s].abs() >= 0.1).collect(),
            condition,
        });
    }
    let b_inv = solver.inverse();
    let mu_b = DVector::from_iterator(q, (0..q).map(|s| r.iter().map(|v| v[s]).sum::<f64>() / n as f64));
    let sigma_b = lag_covariance_sum(&fit.sites, &r, lags, form, taper)?;
    let mu_beta = &b_inv * &mu_b;
    let sigma_beta = &b_inv * &sigma_b * b_inv.transpose();
    let sigma_beta = (&sigma_beta + sigma_beta.transpose()) * 0.5;
    Ok(InferenceResult {
        b_zz,
        mu_b,
        sigma_b,
        mu_beta,
        sigma_beta,
        lag_bounds: lags,
        form,
        taper,
        n_sites: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub centered: bool,
}

/// `N d' Sigma_beta^{-1} d` with `d = beta_hat - beta0` (minus `mu_beta`
/// when `centered`).
pub fn wald_test(fit: &PlmFit, inf: &InferenceResult, beta0: &[f64], centered: bool) -> Result<WaldResult> {
    let q = fit.q();
    if beta0.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            actual: beta0.len(),
        });
    }
    let solver = SymSolver::new(&inf.sigma_beta);
    let min_eigenvalue = solver.min_eigenvalue();
    if !(min_eigenvalue > 0.0) || !(solver.condition() < MAX_CONDITION) {
        return Err(Error::IndefiniteCovariance { min_eigenvalue });
    }
    let mut d = DMatrix::from_iterator(q, 1, fit.beta_hat.iter().zip(beta0).map(|(b, b0)| b - b0));
    if centered {
        for s in 0..q {
            d[(s, 0)] -= inf.mu_beta[s];
        }
    }
    let solved = solver.solve(&d);
    let quad: f64 = d.iter().zip(solved.iter()).map(|(a, b)| a * b).sum();
    let statistic = (inf.n_sites as f64 * quad).max(0.0);
    let chi = ChiSquared::new(q as f64).map_err(|e| Error::Validation(e.to_string()))?;
    let p_value = if statistic == 0.0 { 1.0 } else { chi.sf(statistic) };
    Ok(WaldResult {
        statistic,
        dof: q,
        p_value,
        centered,
    })
}

/// Residuals of the model with `g_k` replaced by a least-squares line in
/// `X^(k)`; the other components keep their fitted curves.
pub fn null_residuals(design: &DesignSet, fit: &PlmFit, k: usize) -> Result<(f64, Vec<f64>)> {
    if k >= fit.p() {
        return Err(Error::DimensionMismatch {
            expected: fit.p(),
            actual: k + 1,
        });
    }
    let n = design.len();
    // Y~ - Z~'beta - sum_(l != k) g_l
    let partial: Vec<f64> = (0..n).map(|i| fit.residuals[i] + fit.component_values[k][i]).collect();
    let xs = design.x_column(k);
    let x_bar = xs.iter().sum::<f64>() / n as f64;
    let r_bar = partial.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Validation(format!("component {k} has constant covariate")));
    }
    let sxr: f64 = xs.iter().zip(&partial).map(|(x, r)| (x - x_bar) * (r - r_bar)).sum();
    let gamma = sxr / sxx;
    let eps = xs
        .iter()
        .zip(&partial)
        .map(|(x, r)| r - r_bar - gamma * (x - x_bar))
        .collect();
    Ok((gamma, eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearityStat {
    pub k: usize,
    pub value: f64,
    pub gamma_k: f64,
    pub residuals: Vec<f64>,
}

/// `sum_(a != b) K_b(X_a - X_b) e_a e_b` over ordered pairs of distinct sites.
pub fn kernel_pair_sum(design: &DesignSet, kernel: &Kernel, b: &[f64], eps: &[f64]) -> Result<f64> {
    if b.len() != design.p() {
        return Err(Error::DimensionMismatch {
            expected: design.p(),
            actual: b.len(),
        });
    }
    if eps.len() != design.len() {
        return Err(Error::DimensionMismatch {
            expected: design.len(),
            actual: eps.len(),
        });
    }
    let n = design.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|a| {
            let xa = design.x_row(a);
            let mut acc = 0.0;
            for c in 0..n {
                if c != a {
                    acc += product_kernel_unchecked(kernel, b, xa, design.x_row(c)) * eps[c];
                }
            }
            acc * eps[a]
        })
        .collect();
    Ok(rows.iter().sum())
}

/// Kernel statistic for linearity of component `k`.
pub fn linearity_statistic(design: &DesignSet, fit: &PlmFit, kernel: &Kernel, b: &[f64], k: usize) -> Result<LinearityStat> {
    let (gamma_k, residuals) = null_residuals(design, fit, k)?;
    let value = kernel_pair_sum(design, kernel, b, &residuals)?;
    Ok(LinearityStat {
        k,
        value,
        gamma_k,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BandwidthSet;
    use crate::plm::{fit, FitOptions};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(side: usize) -> Vec<(usize, usize)> {
        (0..side * side).map(|i| (i / side, i % side)).collect()
    }

    /// Every (i, j, u, v) term written out.
    fn oracle(sites: &[(usize, usize)], r: &[Vec<f64>], m: isize, n: isize, centre: bool) -> DMatrix<f64> {
        let q = r[0].len();
        let len = sites.len() as f64;
        let c: Vec<f64> = (0..q)
            .map(|s| if centre { r.iter().map(|v| v[s]).sum::<f64>() / len } else { 0.0 })
            .collect();
        let mut out = DMatrix::zeros(q, q);
        for i in -m..=m {
            for j in -n..=n {
                for (a, sa) in sites.iter().enumerate() {
                    for (b, sb) in sites.iter().enumerate() {
                        if sb.0 as isize - sa.0 as isize == i && sb.1 as isize - sa.1 as isize == j {
                            for s in 0..q {
                                for t in 0..q {
                                    out[(s, t)] += (r[a][s] - c[s]) * (r[b][t] - c[t]) / len;
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn hand_two_by_two() {
        let sites = square(2);
        let r = vec![vec![1.0], vec![-1.0], vec![-1.0], vec![1.0]];
        let lags = LagBounds { rows: 1, cols: 1 };
        let got = lag_covariance_sum(&sites, &r, lags, ModelForm::Additive, Taper::None).unwrap();
        // lag (0,0): 1; four axial lags: -0.5 each; four diagonal: 0.25 each
        assert_eq!(got[(0, 0)], 1.0 - 4.0 * 0.5 + 4.0 * 0.25);
        let zero = lag_covariance_sum(&sites, &r, LagBounds { rows: 0, cols: 0 }, ModelForm::Additive, Taper::None)
            .unwrap();
        assert_eq!(zero[(0, 0)], 1.0);
        let bartlett = lag_covariance_sum(&sites, &r, lags, ModelForm::Additive, Taper::Bartlett).unwrap();
        assert!((bartlett[(0, 0)] - (1.0 - 4.0 * 0.25 + 4.0 * 0.0625)).abs() < 1e-15);
    }

    #[test]
    fn lag_bounds_checked() {
        let sites = square(3);
        let r = vec![vec![1.0]; 9];
        assert!(lag_covariance_sum(&sites, &r, LagBounds { rows: 3, cols: 0 }, ModelForm::Additive, Taper::None)
            .is_err());
        assert_eq!(LagBounds::default_for((18, 23)), LagBounds { rows: 2, cols: 2 });
        assert_eq!(LagBounds::default_for((27, 64)), LagBounds { rows: 3, cols: 4 });
        assert_eq!(site_extent(&[(1, 1), (3, 5)]), (3, 5));
    }

    proptest! {
        #[test]
        fn lag_sum_matches_term_oracle(seed in 0u64..200, m in 0usize..3, n in 0usize..3, general in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sites = square(4);
            let r: Vec<Vec<f64>> = (0..16).map(|_| vec![rng.random::<f64>() - 0.5, rng.random::<f64>()]).collect();
            let form = if general { ModelForm::General } else { ModelForm::Additive };
            let got = lag_covariance_sum(&sites, &r, LagBounds { rows: m, cols: n }, form, Taper::None).unwrap();
            let want = oracle(&sites, &r, m as isize, n as isize, general);
            prop_assert_eq!(&got, &got.transpose());
            for (a, b) in got.iter().zip(want.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let zero = lag_covariance_sum(&sites, &r, LagBounds { rows: 0, cols: 0 }, form, Taper::None).unwrap();
            let eig = nalgebra::SymmetricEigen::new(zero).eigenvalues;
            prop_assert!(eig.iter().all(|v| *v >= -1e-12));
        }
    }

    fn synthetic(seed: u64, side: usize) -> DesignSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = side * side;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| vec![r[0] + rng.random::<f64>(), rng.random::<f64>() - r[0]])
            .collect();
        let y = x
            .iter()
            .zip(&z)
            .map(|(xr, zr)| (3.0 * xr[0]).sin() + 0.5 * zr[0] - 0.2 * zr[1] + 0.3 * (rng.random::<f64>() - 0.5))
            .collect();
        DesignSet::from_rows(square(side), y, x, z).unwrap()
    }

    #[test]
    fn wald_basics() {
        let d = synthetic(1, 10);
        let f = fit(&d, &Kernel::epanechnikov(), &BandwidthSet::uniform(0.4, 1).unwrap(), &FitOptions::default())
            .unwrap();
        let inf = estimate_covariance(&f, LagBounds { rows: 0, cols: 0 }, ModelForm::Additive).unwrap();
        let w = wald_test(&f, &inf, &f.beta_hat.clone(), false).unwrap();
        assert_eq!(w.statistic, 0.0);
        assert_eq!(w.p_value, 1.0);
        assert_eq!(w.dof, 2);
        assert!(inf.mu_b.iter().all(|v| v.abs() < 1e-12));
        assert!(wald_test(&f, &inf, &[0.0], false).is_err());

        let w = wald_test(&f, &inf, &[0.0, 0.0], false).unwrap();
        let chi = ChiSquared::new(2.0).unwrap();
        assert!((w.p_value - (1.0 - chi.cdf(w.statistic))).abs() < 1e-12);
        assert!(w.statistic > 0.0);
    }

    #[test]
    fn scalar_wald_formula() {
        let base = synthetic(2, 10);
        let n = base.len();
        let d = DesignSet::from_rows(
            base.sites().to_vec(),
            base.y().to_vec(),
            (0..n).map(|i| base.x_row(i).to_vec()).collect(),
            (0..n).map(|i| vec![base.z_row(i)[0]]).collect(),
        )
        .unwrap();
        let f = fit(&d, &Kernel::epanechnikov(), &BandwidthSet::uniform(0.4, 1).unwrap(), &FitOptions::default())
            .unwrap();
        let inf = estimate_covariance(&f, LagBounds { rows: 1, cols: 1 }, ModelForm::Additive).unwrap();
        let beta0 = 0.3;
        let w = wald_test(&f, &inf, &[beta0], false).unwrap();
        let hand = n as f64 * (f.beta_hat[0] - beta0).powi(2) / inf.sigma_beta[(0, 0)];
        assert!((w.statistic - hand).abs() < 1e-9 * hand);
        let b = inf.b_zz[(0, 0)];
        assert!((inf.sigma_beta[(0, 0)] - inf.sigma_b[(0, 0)] / (b * b)).abs() < 1e-12);
    }

    #[test]
    fn wald_invariant_to_reparametrising_z() {
        let d = synthetic(3, 10);
        let n = d.len();
        let a = [[2.0, 0.5], [-1.0, 1.5]];
        let z2: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let z = d.z_row(i);
                vec![a[0][0] * z[0] + a[0][1] * z[1], a[1][0] * z[0] + a[1][1] * z[1]]
            })
            .collect();
        let d2 = DesignSet::from_rows(
            d.sites().to_vec(),
            d.y().to_vec(),
            (0..n).map(|i| d.x_row(i).to_vec()).collect(),
            z2,
        )
        .unwrap();
        let kern = Kernel::epanechnikov();
        let b = BandwidthSet::uniform(0.4, 1).unwrap();
        let opts = FitOptions::default();
        let f1 = fit(&d, &kern, &b, &opts).unwrap();
        let f2 = fit(&d2, &kern, &b, &opts).unwrap();
        let lags = LagBounds { rows: 0, cols: 0 };
        let i1 = estimate_covariance(&f1, lags, ModelForm::Additive).unwrap();
        let i2 = estimate_covariance(&f2, lags, ModelForm::Additive).unwrap();
        // beta0 transforms as A^{-T} beta0
        let beta0 = [0.4, -0.1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let inv_t = [[a[1][1] / det, -a[1][0] / det], [-a[0][1] / det, a[0][0] / det]];
        let beta0_2 = [
            inv_t[0][0] * beta0[0] + inv_t[0][1] * beta0[1],
            inv_t[1][0] * beta0[0] + inv_t[1][1] * beta0[1],
        ];
        let w1 = wald_test(&f1, &i1, &beta0, false).unwrap();
        let w2 = wald_test(&f2, &i2, &beta0_2, false).unwrap();
        assert!((w1.statistic - w2.statistic).abs() < 1e-6 * w1.statistic.max(1.0));
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let d = synthetic(4, 8);
        let f = fit(&d, &Kernel::epanechnikov(), &BandwidthSet::uniform(0.4, 1).unwrap(), &FitOptions::default())
            .unwrap();
        let mut inf = estimate_covariance(&f, LagBounds { rows: 1, cols: 1 }, ModelForm::General).unwrap();
        inf.sigma_beta[(1, 1)] = -1.0;
        assert!(matches!(wald_test(&f, &inf, &[0.0, 0.0], true), Err(Error::IndefiniteCovariance { .. })));
    }

    fn tiny(x: Vec<f64>) -> DesignSet {
        let n = x.len();
        DesignSet::from_rows(
            (0..n).map(|i| (0, i)).collect(),
            vec![0.0; n],
            x.into_iter().map(|v| vec![v]).collect(),
            vec![vec![]; n],
        )
        .unwrap()
    }

    #[test]
    fn kernel_pair_sum_by_hand() {
        let kern = Kernel::epanechnikov();
        let d = tiny(vec![0.0, 0.5]);
        let eps = [1.5, -2.0];
        let got = kernel_pair_sum(&d, &kern, &[1.0], &eps).unwrap();
        assert!((got - 2.0 * kern.eval(-0.5) * 1.5 * -2.0).abs() < 1e-15);
        assert_eq!(kernel_pair_sum(&d, &kern, &[1.0], &[0.0, 0.0]).unwrap(), 0.0);

        let d = tiny(vec![0.1, 0.4, 0.35, 0.9]);
        let eps = [0.3, -0.7, 1.1, 0.2];
        let mut want = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    let u = (d.x_row(a)[0] - d.x_row(b)[0]) / 0.5;
                    let k = if u.abs() <= 1.0 { 0.75 * (1.0 - u * u) } else { 0.0 };
                    want += k * eps[a] * eps[b];
                }
            }
        }
        let got = kernel_pair_sum(&d, &kern, &[0.5], &eps).unwrap();
        assert!((got - want).abs() < 1e-14);
        // relabelling sites
        let perm = [2, 0, 3, 1];
        let dp = tiny(perm.iter().map(|&i| d.x_row(i)[0]).collect());
        let ep: Vec<f64> = perm.iter().map(|&i| eps[i]).collect();
        assert!((kernel_pair_sum(&dp, &kern, &[0.5], &ep).unwrap() - got).abs() < 1e-14);
    }

    #[test]
    fn linear_component_gives_small_statistic_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let z: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0] + rng.random::<f64>()]).collect();
        let y = x.iter().zip(&z).map(|(xr, zr)| 2.0 * xr[0] + zr[0]).collect();
        let d = DesignSet::from_rows(square(10), y, x, z).unwrap();
        let kern = Kernel::epanechnikov();
        let f = fit(&d, &kern, &BandwidthSet::uniform(0.5, 1).unwrap(), &FitOptions::default()).unwrap();
        let stat = linearity_statistic(&d, &f, &kern, &[0.5], 0).unwrap();
        assert!((stat.gamma_k - 2.0).abs() < 1e-6);
        assert!(stat.residuals.iter().all(|e| e.abs() < 1e-6));
        assert!(stat.value.abs() < 1e-9);
    }
}
