//! Declarative run configuration: a TOML file whose fields can be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use semispatial::inference::{LagBounds, ModelForm, Taper};
use semispatial::lattice::{NeighborScheme, Offset};
use semispatial::plm::{CurveGrid, FitOptions};
use semispatial::projection::WeightConfig;
use semispatial::simulator::{AutoNormalParams, GibbsConfig, InitField, SweepOrder};
use semispatial::{BandwidthSet, CvTarget, Kernel, KernelFamily};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Lattice grid file.
    pub grid: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub scheme: SchemeConfig,
    pub kernel: KernelConfig,
    /// One value per component, or a single value used for all.
    pub bandwidths: Option<Vec<f64>>,
    pub weights: WeightsConfig,
    pub curves: CurvesConfig,
    pub cv: CvConfig,
    pub inference: InferenceConfig,
    pub simulate: Option<SimulateConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeConfig {
    /// `"partially-linear-first-order"` or `"additive-first-order"`.
    Preset(String),
    Explicit {
        x_terms: Vec<Vec<Offset>>,
        #[serde(default)]
        z_terms: Vec<Vec<Offset>>,
    },
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig::Preset("partially-linear-first-order".into())
    }
}

impl SchemeConfig {
    pub fn build(&self) -> Result<NeighborScheme, CliError> {
        match self {
            SchemeConfig::Preset(name) => match name.as_str() {
                "partially-linear-first-order" => Ok(NeighborScheme::partially_linear_first_order()),
                "additive-first-order" => Ok(NeighborScheme::additive_first_order()),
                other => Err(CliError::config(format!("unknown scheme preset {other:?}"))),
            },
            SchemeConfig::Explicit { x_terms, z_terms } => Ok(NeighborScheme::new(x_terms.clone(), z_terms.clone())?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub family: String,
    pub radius: f64,
    pub order: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: "epanechnikov".into(),
            radius: 1.0,
            order: 2,
        }
    }
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel, CliError> {
        let family: KernelFamily = self.family.parse()?;
        let base = Kernel::with_radius(family, self.radius)?;
        Ok(if self.order == 2 { base } else { base.make_high_order(self.order)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub target_quantiles: (f64, f64),
    pub box_quantiles: (f64, f64),
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = WeightConfig::default();
        Self {
            target_quantiles: w.target_quantiles,
            box_quantiles: w.box_quantiles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesConfig {
    /// `"dense"` or `"exact"`.
    pub grid: String,
    pub points: usize,
    pub center_channels: bool,
}

impl Default for CurvesConfig {
    fn default() -> Self {
        Self {
            grid: "dense".into(),
            points: 101,
            center_channels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    /// Candidate bandwidth vectors; single-element vectors apply to all components.
    pub candidates: Vec<Vec<f64>>,
    pub target: CvTarget,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            candidates: Vec::new(),
            target: CvTarget::PartiallyLinear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    /// Defaults to the cube root of the site extent.
    pub lag_rows: Option<usize>,
    pub lag_cols: Option<usize>,
    pub form: ModelForm,
    pub taper: Taper,
    /// Hypothesised `beta`; defaults to zero.
    pub beta0: Option<Vec<f64>>,
    /// Subtract the estimated bias term before forming the statistic.
    pub centered: Option<bool>,
    /// Components whose linearity is tested; defaults to all.
    pub linearity: Option<Vec<usize>>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            lag_rows: None,
            lag_cols: None,
            form: ModelForm::General,
            taper: Taper::None,
            beta0: None,
            centered: None,
            linearity: None,
        }
    }
}

impl InferenceConfig {
    pub fn lag_bounds(&self, extent: (usize, usize)) -> LagBounds {
        let d = LagBounds::default_for(extent);
        LagBounds {
            rows: self.lag_rows.unwrap_or(d.rows),
            cols: self.lag_cols.unwrap_or(d.cols),
        }
    }

    /// Centring follows the model form unless set explicitly.
    pub fn centered(&self) -> bool {
        self.centered.unwrap_or(self.form == ModelForm::General)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma2: f64,
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub thin: Option<usize>,
    #[serde(default)]
    pub sweep_order: Option<SweepOrder>,
    /// `"zeros"` or `"stationary-mean"`.
    #[serde(default)]
    pub init: Option<String>,
}

fn one() -> usize {
    1
}

impl SimulateConfig {
    pub fn params(&self) -> Result<AutoNormalParams, CliError> {
        Ok(AutoNormalParams::new(self.gamma0, self.gamma1, self.gamma2, self.sigma2)?)
    }

    pub fn gibbs(&self, seed: u64) -> Result<GibbsConfig, CliError> {
        let d = GibbsConfig::default();
        let init = match self.init.as_deref() {
            None | Some("stationary-mean") => InitField::StationaryMean,
            Some("zeros") => InitField::Zeros,
            Some(other) => return Err(CliError::config(format!("unknown init {other:?}"))),
        };
        Ok(GibbsConfig {
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thin: self.thin.unwrap_or(d.thin),
            seed,
            init,
            sweep_order: self.sweep_order.unwrap_or(d.sweep_order),
        })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn grid_path(&self) -> Result<&Path, CliError> {
        self.grid
            .as_deref()
            .ok_or_else(|| CliError::config("no grid file given (set `grid` or pass --grid)"))
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().unwrap_or(Path::new("."))
    }

    pub fn bandwidth_set(&self, p: usize) -> Result<BandwidthSet, CliError> {
        let b = self
            .bandwidths
            .as_ref()
            .ok_or_else(|| CliError::config("no bandwidths given (set `bandwidths` or pass --bandwidth)"))?;
        broadcast(b, p)
    }

    pub fn candidate_sets(&self, p: usize) -> Result<Vec<BandwidthSet>, CliError> {
        if self.cv.candidates.is_empty() {
            return Err(CliError::config("no cross-validation candidates given (set `cv.candidates`)"));
        }
        self.cv.candidates.iter().map(|c| broadcast(c, p)).collect()
    }

    pub fn fit_options(&self) -> Result<FitOptions, CliError> {
        let weights = WeightConfig {
            target_quantiles: self.weights.target_quantiles,
            box_quantiles: self.weights.box_quantiles,
        };
        weights.validate()?;
        let grid = match self.curves.grid.as_str() {
            "dense" => {
                if self.curves.points < 2 {
                    return Err(CliError::config("curves.points must be at least 2"));
                }
                CurveGrid::Dense(self.curves.points)
            }
            "exact" => CurveGrid::Exact,
            other => return Err(CliError::config(format!("unknown curve grid {other:?}"))),
        };
        Ok(FitOptions {
            grid,
            weights,
            center_channels: self.curves.center_channels,
        })
    }
}

fn broadcast(b: &[f64], p: usize) -> Result<BandwidthSet, CliError> {
    match b.len() {
        1 => Ok(BandwidthSet::uniform(b[0], p)?),
        n if n == p => Ok(BandwidthSet::new(b.to_vec())?),
        n => Err(CliError::config(format!("{n} bandwidths given for {p} components"))),
    }
}
