//! Semiparametric regression on regular lattices.
//!
//! The estimators here fit partially linear models
//! `Y = mu + Z'beta + g_1(X_1) + ... + g_p(X_p) + e` to data observed on an
//! `m x n` grid, where the covariates are typically sums of neighbouring grid
//! values. The nonparametric part is estimated with a product-kernel local
//! linear smoother and projected onto additive components by marginal
//! integration; `beta` is then obtained by least squares on the projected
//! residuals.
//!
//! Module map:
//!
//! * [`lattice`]: grid loading and neighbour-sum design construction.
//! * [`kernel`]: univariate kernels, product kernels, moments and higher-order kernels.
//! * [`smoother`]: local linear systems and per-channel solves.
//! * [`projection`]: marginal integration onto component curves.
//! * [`plm`]: the full partially linear fit.
//! * [`inference`]: lag-truncated covariance, Wald tests and the kernel linearity statistic.
//! * [`bandwidth`]: leave-one-out cross-validation.
//! * [`simulator`]: Gibbs sampling of the first-order auto-normal scheme.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bandwidth;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod lattice;
mod linalg;
pub mod plm;
pub mod projection;
pub mod simulator;
pub mod smoother;

pub use bandwidth::{cross_validate, CvReport, CvTarget};
pub use error::{Error, Result};
pub use inference::{
    estimate_covariance, linearity_statistic, null_residuals, wald_test, InferenceResult,
    LagBounds, LinearityStat, ModelForm, WaldResult,
};
pub use kernel::{BandwidthSet, Kernel, KernelFamily, KernelMoments};
pub use lattice::{build_design, load_grid, DesignSet, LatticeField, NeighborScheme};
pub use plm::{fit, CurveGrid, FitOptions, PlmFit};
pub use projection::{ComponentCurve, WeightConfig, WeightSpec};
pub use simulator::{simulate, AutoNormalParams, GibbsConfig, InitField, SweepOrder};
pub use smoother::{ChannelId, LocalSystem, Smoother};
