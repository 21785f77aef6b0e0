//! Compactly supported univariate kernels and their products.
//!
//! A [`Kernel`] is a base family rescaled to the support `[-R, R]`,
//! optionally multiplied by an even polynomial so that its moments of order
//! `1..I-1` vanish (a kernel of order `I`).

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `0.75 (1 - t^2)` on `[-1, 1]`.
    Epanechnikov,
    /// `15/16 (1 - t^2)^2` on `[-1, 1]` (biweight).
    Quartic,
    /// `1/2` on `[-1, 1]`.
    Uniform,
}

impl KernelFamily {
    fn standard(self, t: f64) -> f64 {
        if t.abs() > 1.0 {
            return 0.0;
        }
        match self {
            KernelFamily::Epanechnikov => 0.75 * (1.0 - t * t),
            KernelFamily::Quartic => {
                let s = 1.0 - t * t;
                0.9375 * s * s
            }
            KernelFamily::Uniform => 0.5,
        }
    }

    /// `(int k^2, int t^2 k)` for the unit-support kernel.
    fn standard_moments(self) -> (f64, f64) {
        match self {
            KernelFamily::Epanechnikov => (0.6, 0.2),
            KernelFamily::Quartic => (5.0 / 7.0, 1.0 / 7.0),
            KernelFamily::Uniform => (0.5, 1.0 / 3.0),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Quartic => "quartic",
            KernelFamily::Uniform => "uniform",
        };
        f.write_str(name)
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            "quartic" | "biweight" => Ok(KernelFamily::Quartic),
            "uniform" | "rectangular" => Ok(KernelFamily::Uniform),
            other => Err(Error::Validation(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// A univariate kernel `K(u) = k(u/R) P((u/R)^2) / R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
    radius: f64,
    order: usize,
    /// Coefficients of `P` in powers of `t^2`; `[1.0]` for order-2 kernels.
    poly: Vec<f64>,
}

/// Integrals that enter the asymptotic bias and variance of the smoother.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    /// `J = int K(u)^2 du`.
    pub j_const: f64,
    /// `int u^2 K(u) du`.
    pub mu2: f64,
    /// `int u^I K(u) du` where `I` is the kernel order.
    pub mu_order: f64,
    pub order: usize,
}

impl Default for Kernel {
    fn default() -> Self {
        Self::new(KernelFamily::Epanechnikov)
    }
}

impl Kernel {
    pub fn new(family: KernelFamily) -> Self {
        Self {
            family,
            radius: 1.0,
            order: 2,
            poly: vec![1.0],
        }
    }

    pub fn epanechnikov() -> Self {
        Self::new(KernelFamily::Epanechnikov)
    }

    pub fn with_radius(family: KernelFamily, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Validation(format!(
                "kernel support radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            radius,
            ..Self::new(family)
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Half-width of the support.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval(&self, u: f64) -> f64 {
        let t = u / self.radius;
        let base = self.family.standard(t);
        if base == 0.0 {
            return 0.0;
        }
        let t2 = t * t;
        let poly = self.poly.iter().rev().fold(0.0, |acc, c| acc * t2 + c);
        base * poly / self.radius
    }

    /// `int f(u) du` over the support, by 64-point Gauss-Legendre.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let (nodes, weights) = gauss_legendre_64();
        nodes
            .iter()
            .zip(weights)
            .map(|(&t, &w)| w * f(t * self.radius))
            .sum::<f64>()
            * self.radius
    }

    /// `int u^i K(u) du`.
    pub fn moment(&self, i: u32) -> f64 {
        self.integrate(|u| u.powi(i as i32) * self.eval(u))
    }

    pub fn moments(&self) -> KernelMoments {
        if self.order == 2 {
            let (j, mu2) = self.family.standard_moments();
            let mu2 = mu2 * self.radius * self.radius;
            return KernelMoments {
                j_const: j / self.radius,
                mu2,
                mu_order: mu2,
                order: 2,
            };
        }
        KernelMoments {
            j_const: self.integrate(|u| self.eval(u).powi(2)),
            mu2: self.moment(2),
            mu_order: self.moment(self.order as u32),
            order: self.order,
        }
    }

    /// Kernel of even order `order` built as an even polynomial times this
    /// (order-2) kernel on the same support.
    pub fn make_high_order(&self, order: usize) -> Result<Kernel> {
        if self.order != 2 {
            return Err(Error::Validation(
                "higher-order construction needs an order-2 base kernel".into(),
            ));
        }
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "kernel order must be an even integer >= 2, got {order}"
            )));
        }
        if order == 2 {
            return Ok(self.clone());
        }
        // Unknowns c_0..c_{r-1} of P(t^2) = sum c_j t^{2j}; conditions
        // int t^{2i} P(t^2) k(t) dt = delta_{i0} for i = 0..r-1 make every
        // moment below `order` vanish (odd ones vanish by symmetry).
        let r = order / 2;
        let unit = Kernel::new(self.family);
        let m: Vec<f64> = (0..2 * r).map(|i| unit.moment(2 * i as u32)).collect();
        let a = DMatrix::from_fn(r, r, |i, j| m[i + j]);
        let mut rhs = DVector::zeros(r);
        rhs[0] = 1.0;
        let coeffs = a.lu().solve(&rhs).ok_or_else(|| {
            Error::Validation("moment system for the higher-order kernel is singular".into())
        })?;
        Ok(Kernel {
            family: self.family,
            radius: self.radius,
            order,
            poly: coeffs.iter().copied().collect(),
        })
    }
}

/// Per-covariate bandwidths, with optional per-target overrides used when
/// estimating component `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSet {
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_target: Option<Vec<Vec<f64>>>,
}

impl BandwidthSet {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        check_positive(&b)?;
        Ok(Self { b, per_target: None })
    }

    /// Same bandwidth for each of `p` covariates.
    pub fn uniform(value: f64, p: usize) -> Result<Self> {
        Self::new(vec![value; p])
    }

    /// `overrides[k]` is the full bandwidth vector used for target component `k`.
    pub fn with_targets(b: Vec<f64>, overrides: Vec<Vec<f64>>) -> Result<Self> {
        check_positive(&b)?;
        if overrides.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                actual: overrides.len(),
            });
        }
        for o in &overrides {
            if o.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: b.len(),
                    actual: o.len(),
                });
            }
            check_positive(o)?;
        }
        Ok(Self {
            b,
            per_target: Some(overrides),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Bandwidths for estimating component `k`.
    pub fn for_target(&self, k: usize) -> &[f64] {
        match &self.per_target {
            Some(o) => &o[k],
            None => &self.b,
        }
    }

    /// `b_pi`, the product of the shared bandwidths.
    pub fn product(&self) -> f64 {
        self.b.iter().product()
    }
}

fn check_positive(b: &[f64]) -> Result<()> {
    if b.is_empty() {
        return Err(Error::Validation("bandwidth vector is empty".into()));
    }
    if let Some(bad) = b.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Validation(format!(
            "bandwidths must be positive and finite, got {bad}"
        )));
    }
    Ok(())
}

/// `prod_l K((x_site_l - x0_l) / b_l)`.
pub fn product_kernel(kernel: &Kernel, b: &[f64], x_site: &[f64], x0: &[f64]) -> Result<f64> {
    if x_site.len() != b.len() || x0.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            actual: if x_site.len() != b.len() { x_site.len() } else { x0.len() },
        });
    }
    Ok(product_kernel_unchecked(kernel, b, x_site, x0))
}

pub(crate) fn product_kernel_unchecked(kernel: &Kernel, b: &[f64], x_site: &[f64], x0: &[f64]) -> f64 {
    let mut w = 1.0;
    for ((xs, x), bl) in x_site.iter().zip(x0).zip(b) {
        w *= kernel.eval((xs - x) / bl);
        if w == 0.0 {
            return 0.0;
        }
    }
    w
}

fn gauss_legendre_64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n` from the Chebyshev-like initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and P_{n-1}(x).
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
