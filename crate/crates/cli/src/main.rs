//! `semispatial` command-line front end.

mod config;
mod output;

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semispatial::inference::{estimate_covariance_with, site_extent, LagBounds, ModelForm, Taper};
use semispatial::plm::{component_variances, residual_variance, ComponentVariances};
use semispatial::simulator::{AutoNormalParams, GibbsConfig};
use semispatial::{
    build_design, cross_validate, fit, linearity_statistic, load_grid, simulate, wald_test, CvReport, DesignSet,
    Error, PlmFit,
};
use serde::Serialize;

use config::RunConfig;
use output::{curve_rows, write_curves, write_json, CurveRow};

#[derive(Parser)]
#[command(name = "semispatial", version, about = "Partially linear and additive regression on lattice data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write a report, the fitted state and curve files.
    Fit(Common),
    /// Score bandwidth candidates by leave-one-out cross-validation.
    Cv(Common),
    /// Fit, then run the Wald test on beta and the linearity statistics.
    Test(Common),
    /// Draw replicate fields from the auto-normal scheme.
    Simulate(Common),
    /// Re-evaluate the curves of a saved fit on a new grid.
    Curves(CurvesArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lattice grid file.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated bandwidths, one per component or a single shared value.
    #[arg(long, value_delimiter = ',')]
    bandwidth: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CurvesArgs {
    /// `fit_state.json` written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    /// Evaluation grid as `lo,hi,n`; defaults to each curve's own span.
    #[arg(long, value_delimiter = ',', value_name = "LO,HI,N")]
    at: Option<Vec<f64>>,
    /// Points per curve when `--at` is not given.
    #[arg(long, default_value_t = 201)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io { path: PathBuf, source: io::Error },
    Core(Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_input_error() => 3,
            _ => 2,
        }
    }

    fn record(&self) -> ErrorRecord {
        match self {
            CliError::Config(m) => ErrorRecord {
                kind: "ConfigError",
                module: "cli",
                message: m.clone(),
            },
            CliError::Io { path, source } => ErrorRecord {
                kind: "IoError",
                module: "cli",
                message: format!("{}: {source}", path.display()),
            },
            CliError::Core(e) => ErrorRecord {
                kind: e.kind(),
                module: e.module(),
                message: e.to_string(),
            },
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Serialize)]
struct ErrorRecord {
    kind: &'static str,
    module: &'static str,
    message: String,
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(g) = &common.grid {
        cfg.grid = Some(g.clone());
    }
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(b) = &common.bandwidth {
        cfg.bandwidths = Some(b.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn load_design(cfg: &RunConfig) -> Result<DesignSet, CliError> {
    let path = cfg.grid_path()?;
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let field = load_grid(io::BufReader::new(file))?;
    Ok(build_design(&field, &cfg.scheme.build()?)?)
}

fn run_fit(cfg: &RunConfig, design: &DesignSet) -> Result<PlmFit, CliError> {
    let kernel = cfg.kernel.build()?;
    let b = cfg.bandwidth_set(design.p())?;
    Ok(fit(design, &kernel, &b, &cfg.fit_options()?)?)
}

#[derive(Serialize)]
struct FitReport<'a> {
    command: &'static str,
    n_sites: usize,
    p: usize,
    q: usize,
    beta_hat: &'a [f64],
    mu_hat: f64,
    residual_variance: f64,
    component_variances: ComponentVariances,
    curve_offsets: Vec<f64>,
    curve_file: &'static str,
    state_file: &'static str,
    config: &'a RunConfig,
}

fn fit_report<'a>(f: &'a PlmFit, design: &DesignSet, cfg: &'a RunConfig, command: &'static str) -> FitReport<'a> {
    FitReport {
        command,
        n_sites: design.len(),
        p: f.p(),
        q: f.q(),
        beta_hat: &f.beta_hat,
        mu_hat: f.mu_hat,
        residual_variance: residual_variance(f),
        component_variances: component_variances(f, design),
        curve_offsets: f.curves.iter().map(|c| c.offset).collect(),
        curve_file: "curves.csv",
        state_file: "fit_state.json",
        config: cfg,
    }
}

fn cmd_fit(common: &Common) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    init_threads(cfg.threads)?;
    let design = load_design(&cfg)?;
    let f = run_fit(&cfg, &design)?;
    let out = cfg.output_dir();
    prepare_out(out)?;
    write_curves(&out.join("curves.csv"), &curve_rows(&f.curves))?;
    write_json(&out.join("fit_state.json"), &f)?;
    write_json(&out.join("fit_report.json"), &fit_report(&f, &design, &cfg, "fit"))
}

#[derive(Serialize)]
struct CvOutput<'a> {
    command: &'static str,
    report: &'a CvReport,
    selected_bandwidths: &'a [f64],
    selected_score: f64,
    config: &'a RunConfig,
}

fn cmd_cv(common: &Common) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    init_threads(cfg.threads)?;
    let design = load_design(&cfg)?;
    let kernel = cfg.kernel.build()?;
    let candidates = cfg.candidate_sets(design.p())?;
    let report = cross_validate(&design, &kernel, &candidates, cfg.cv.target, &cfg.fit_options()?)?;
    let out = cfg.output_dir();
    prepare_out(out)?;
    write_json(
        &out.join("cv_report.json"),
        &CvOutput {
            command: "cv",
            report: &report,
            selected_bandwidths: report.selected_bandwidths().values(),
            selected_score: report.selected_score(),
            config: &cfg,
        },
    )
}

#[derive(Serialize)]
struct WaldOutput {
    statistic: f64,
    dof: usize,
    p_value: f64,
    centered: bool,
    beta0: Vec<f64>,
    lag_bounds: LagBounds,
    form: ModelForm,
    taper: Taper,
    sigma_beta: Vec<Vec<f64>>,
    mu_beta: Vec<f64>,
}

#[derive(Serialize)]
struct LinearityOutput {
    k: usize,
    statistic: f64,
    gamma_k: f64,
}

#[derive(Serialize)]
struct TestReport<'a> {
    command: &'static str,
    fit: FitReport<'a>,
    wald: Option<WaldOutput>,
    linearity: Vec<LinearityOutput>,
}

fn cmd_test(common: &Common) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    init_threads(cfg.threads)?;
    let design = load_design(&cfg)?;
    let f = run_fit(&cfg, &design)?;
    let inf_cfg = &cfg.inference;

    let wald = if f.q() > 0 {
        let beta0 = inf_cfg.beta0.clone().unwrap_or_else(|| vec![0.0; f.q()]);
        let lags = inf_cfg.lag_bounds(site_extent(&f.sites));
        let inf = estimate_covariance_with(&f, lags, inf_cfg.form, inf_cfg.taper)?;
        let w = wald_test(&f, &inf, &beta0, inf_cfg.centered())?;
        let q = f.q();
        Some(WaldOutput {
            statistic: w.statistic,
            dof: w.dof,
            p_value: w.p_value,
            centered: w.centered,
            beta0,
            lag_bounds: inf.lag_bounds,
            form: inf.form,
            taper: inf.taper,
            sigma_beta: (0..q).map(|a| (0..q).map(|b| inf.sigma_beta[(a, b)]).collect()).collect(),
            mu_beta: inf.mu_beta.iter().copied().collect(),
        })
    } else {
        None
    };

    let kernel = cfg.kernel.build()?;
    let components = inf_cfg.linearity.clone().unwrap_or_else(|| (0..f.p()).collect());
    let mut linearity = Vec::new();
    for k in components {
        let l = linearity_statistic(&design, &f, &kernel, f.bandwidths.values(), k)?;
        linearity.push(LinearityOutput {
            k,
            statistic: l.value,
            gamma_k: l.gamma_k,
        });
    }

    let out = cfg.output_dir();
    prepare_out(out)?;
    write_curves(&out.join("curves.csv"), &curve_rows(&f.curves))?;
    write_json(&out.join("fit_state.json"), &f)?;
    write_json(
        &out.join("test_report.json"),
        &TestReport {
            command: "test",
            fit: fit_report(&f, &design, &cfg, "test"),
            wald,
            linearity,
        },
    )
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    params: AutoNormalParams,
    rows: usize,
    cols: usize,
    replicates: usize,
    gibbs: &'a GibbsConfig,
    /// Replicate `r` uses the seed on generator stream `r`.
    seed: u64,
    files: Vec<String>,
    config: &'a RunConfig,
}

fn cmd_simulate(common: &Common) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    init_threads(cfg.threads)?;
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::config("no [simulate] section in the configuration"))?;
    let params = sim.params()?;
    let gibbs = sim.gibbs(cfg.seed)?;
    let fields = simulate(&params, sim.rows, sim.cols, &gibbs, sim.replicates)?;
    let out = cfg.output_dir();
    prepare_out(out)?;
    let width = sim.replicates.saturating_sub(1).to_string().len().max(4);
    let mut files = Vec::new();
    for (r, field) in fields.iter().enumerate() {
        let name = format!("replicate_{r:0width$}.txt");
        let path = out.join(&name);
        std::fs::write(&path, field.to_grid_string()).map_err(|e| CliError::io(&path, e))?;
        files.push(name);
    }
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            command: "simulate",
            params,
            rows: sim.rows,
            cols: sim.cols,
            replicates: sim.replicates,
            gibbs: &gibbs,
            seed: cfg.seed,
            files,
            config: &cfg,
        },
    )
}

fn cmd_curves(args: &CurvesArgs) -> Result<(), CliError> {
    init_threads(args.threads)?;
    let text = std::fs::read_to_string(&args.fit).map_err(|e| CliError::io(&args.fit, e))?;
    let f: PlmFit = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: not a saved fit: {e}", args.fit.display())))?;
    if args.at.as_ref().is_some_and(|v| v.len() != 3) {
        return Err(CliError::config("--at takes exactly three values: lo,hi,n"));
    }
    let mut rows = Vec::new();
    for c in &f.curves {
        let (lo, hi, n) = match &args.at {
            Some(v) => (v[0], v[1], v[2]),
            None => (c.grid[0], c.grid[c.grid.len() - 1], args.points as f64),
        };
        if !(n >= 2.0 && n.fract() == 0.0) || !(lo < hi) {
            return Err(CliError::config(format!("invalid evaluation grid {lo},{hi},{n}")));
        }
        let n = n as usize;
        for i in 0..n {
            let x = if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            let centered = c.value_at(x)?;
            let node = c.grid.iter().position(|&g| g == x);
            rows.push(CurveRow {
                k: c.k,
                x,
                estimate: Some(centered + c.offset),
                centered_estimate: Some(centered),
                n_effective: node.map(|i| c.n_effective[i]),
            });
        }
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.fit.parent().unwrap_or(Path::new(".")).join("curves_resampled.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_out(dir)?;
    }
    write_curves(&out, &rows)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(c) => cmd_fit(c),
        Command::Cv(c) => cmd_cv(c),
        Command::Test(c) => cmd_test(c),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Curves(a) => cmd_curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.record() });
            eprintln!("{record}");
            ExitCode::from(e.exit_code())
        }
    }
}
