//! Command-line front end: data files, seeded simulation, fitting and
//! diagnostics.
//!
//! Sample files hold one decimal number per line; blank lines and lines
//! starting with `#` are skipped. Measure files are comma-separated with a
//! `theta,weight` header and 17 significant digits per value, which
//! round-trips every `f64`.
//!
//! Simulation draws from a ChaCha8 generator seeded with the given seed.
//! Exponential variates use inversion, `−ln(1 − U)` with `U` uniform on
//! `[0, 1)`; normal variates use the ziggurat sampler of `rand_distr`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::family::{
    mixture_cdf, mixture_eval, std_normal_cdf, Atom, AtomicMeasure, GaussianFamily, MixingMeasure, TriangularFamily,
};
use crate::gridless::{fine_tune_certified, LocationObjective};
use crate::lsconvex::{positive_grid, LsModel};
use crate::mldeconv::{MlModel, DEFAULT_GRID_SIZE};
use crate::sample::Sample;
use crate::solver::{check_optimality, Certificate, ConeObjective, DerivativeKind, Grid, SolverConfig, Tolerance};

/// Grid size of the least-squares model when none is given.
pub const LS_GRID_SIZE: usize = 1000;
/// Number of points of every curve file.
pub const CURVE_POINTS: usize = 512;

#[derive(Debug, Parser)]
#[command(name = "mixfit", version, about = "Mixture fitting by support reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a seeded sample and write it to a file.
    Simulate(SimulateArgs),
    /// Fit a model and write the measure, a report and curve files.
    Fit(FitArgs),
    /// Evaluate the optimality certificate of a stored measure.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    /// Standard exponential.
    Exponential,
    /// `θ + Z` with `θ ~ Exp(1)` and `Z ~ N(0, 1)`.
    ExpNormalMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    /// Least squares over convex decreasing densities.
    ConvexLs,
    /// Maximum likelihood Gaussian deconvolution.
    DeconvMl,
}

impl ModelKind {
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::ConvexLs => "convex-ls",
            ModelKind::DeconvMl => "deconv-ml",
        }
    }

    fn default_eta(self) -> f64 {
        match self {
            ModelKind::ConvexLs => 1e-10,
            ModelKind::DeconvMl => 1e-8,
        }
    }

    fn certificate_kind(self) -> DerivativeKind {
        match self {
            ModelKind::ConvexLs => DerivativeKind::Alternative,
            ModelKind::DeconvMl => DerivativeKind::Raw,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: SimKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Lower grid end [default: 0 for convex-ls, x_(1) for deconv-ml].
    #[arg(long)]
    pub grid_min: Option<f64>,
    /// Upper grid end [default: 3·x_(n) for convex-ls, x_(n) for deconv-ml].
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Number of grid points [default: 1000 for convex-ls, 500 for deconv-ml].
    #[arg(long)]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(value_enum)]
    pub model: ModelKind,
    pub input: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Accuracy η [default: 1e-10 for convex-ls, 1e-8 for deconv-ml].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Cap on outer (convex-ls) or Newton (deconv-ml) iterations.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Refine support locations off the grid (default for deconv-ml).
    #[arg(long, conflicts_with = "no_gridless")]
    pub gridless: bool,
    /// Skip gridless refinement.
    #[arg(long)]
    pub no_gridless: bool,
    #[arg(long, default_value_t = 1e-6)]
    pub gridless_tol: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub measure: PathBuf,
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub grid: GridArgs,
}

/// Parses a sample file body. Line numbers in errors are 1-based.
pub fn parse_sample(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .with_context(|| format!("line {}: cannot parse {line:?} as a number", i + 1))?;
        if !v.is_finite() {
            bail!("line {}: value {line:?} is not finite", i + 1);
        }
        values.push(v);
    }
    if values.is_empty() {
        bail!("sample is empty");
    }
    Ok(values)
}

/// Reads a sample; the convex-ls model rejects negative values.
pub fn ingest(path: &Path, model: Option<ModelKind>) -> anyhow::Result<Sample> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let values = parse_sample(&text).with_context(|| format!("in {}", path.display()))?;
    if model == Some(ModelKind::ConvexLs) {
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            bail!("{}: convex-ls needs nonnegative observations, found {v}", path.display());
        }
    }
    Ok(Sample::new(values)?)
}

/// Seeded draw of `n` observations.
pub fn simulate(kind: SimKind, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exponential = |rng: &mut ChaCha8Rng| -(1.0 - rng.random::<f64>()).ln();
    (0..n)
        .map(|_| match kind {
            SimKind::Exponential => exponential(&mut rng),
            SimKind::ExpNormalMixture => {
                let theta = exponential(&mut rng);
                let z: f64 = rng.sample(StandardNormal);
                theta + z
            }
        })
        .collect()
}

pub fn format_sample(values: &[f64]) -> String {
    let mut out = String::new();
    for v in values {
        writeln!(out, "{v:.16e}").unwrap();
    }
    out
}

pub fn format_measure(measure: &MixingMeasure) -> String {
    let mut out = String::from("theta,weight\n");
    for a in measure.atoms() {
        writeln!(out, "{:.16e},{:.16e}", a.location, a.weight).unwrap();
    }
    out
}

pub fn parse_measure(text: &str) -> anyhow::Result<MixingMeasure> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.trim() == "theta,weight" => {}
        _ => bail!("measure file must start with a `theta,weight` header"),
    }
    let mut atoms = Vec::new();
    for (i, line) in lines {
        let (t, w) = line
            .split_once(',')
            .with_context(|| format!("line {}: expected `theta,weight`", i + 1))?;
        let t: f64 = t.trim().parse().with_context(|| format!("line {}: bad theta", i + 1))?;
        let w: f64 = w.trim().parse().with_context(|| format!("line {}: bad weight", i + 1))?;
        atoms.push(Atom::new(t, w));
    }
    Ok(MixingMeasure::new(atoms)?)
}

pub fn read_measure(path: &Path) -> anyhow::Result<MixingMeasure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_measure(&text).with_context(|| format!("in {}", path.display()))
}

/// Grid for `model` from explicit overrides and the sample.
pub fn build_grid(model: ModelKind, sample: &Sample, args: &GridArgs) -> anyhow::Result<Grid> {
    let grid = match model {
        ModelKind::ConvexLs => positive_grid(
            args.grid_min.unwrap_or(0.0),
            args.grid_max.unwrap_or(3.0 * sample.max()),
            args.grid_size.unwrap_or(LS_GRID_SIZE),
        )?,
        ModelKind::DeconvMl => {
            let lo = args.grid_min.unwrap_or(sample.min());
            let hi = args.grid_max.unwrap_or(sample.max());
            let n = args.grid_size.unwrap_or(DEFAULT_GRID_SIZE);
            if lo == hi {
                Grid::new(vec![lo])?
            } else {
                Grid::equidistant(lo, hi, n)?
            }
        }
    };
    Ok(grid)
}

/// Summary of a fit, written as `key: value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub model: ModelKind,
    pub input: PathBuf,
    pub n: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_size: usize,
    pub eta: f64,
    pub max_iter: usize,
    pub gridless: bool,
    pub gridless_tol: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub grid_support_size: usize,
    pub fine_tune_steps: usize,
    pub gradient_norm: Option<f64>,
    pub final_objective: f64,
    pub total_mass: f64,
    pub atoms: Vec<Atom>,
    pub certificate: Certificate,
    pub wall_time: f64,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}: {v}").unwrap();
        kv("model", self.model.id().into());
        kv("input", self.input.display().to_string());
        kv("n", self.n.to_string());
        kv("grid_min", format!("{:.16e}", self.grid_min));
        kv("grid_max", format!("{:.16e}", self.grid_max));
        kv("grid_size", self.grid_size.to_string());
        kv("eta", format!("{:e}", self.eta));
        kv("max_iter", self.max_iter.to_string());
        kv("gridless", self.gridless.to_string());
        kv("gridless_tol", format!("{:e}", self.gridless_tol));
        kv("converged", self.converged.to_string());
        kv("outer_iterations", self.outer_iterations.to_string());
        kv("grid_support_size", self.grid_support_size.to_string());
        kv("fine_tune_steps", self.fine_tune_steps.to_string());
        if let Some(g) = self.gradient_norm {
            kv("gradient_norm", format!("{g:.6e}"));
        }
        kv("final_objective", format!("{:.16e}", self.final_objective));
        kv("total_mass", format!("{:.16e}", self.total_mass));
        kv("support_size", self.atoms.len().to_string());
        for a in &self.atoms {
            kv("atom", format!("{:.16e},{:.16e}", a.location, a.weight));
        }
        let c = &self.certificate;
        kv("certificate_kind", format!("{:?}", c.kind).to_lowercase());
        kv("certificate_min_grid_value", format!("{:.6e}", c.min_grid_value));
        kv("certificate_argmin", format!("{:.16e}", c.argmin));
        kv("certificate_max_abs_support_value", format!("{:.6e}", c.max_abs_support_value));
        kv("certificate_pass", c.pass.to_string());
        kv("wall_time_s", format!("{:.3}", self.wall_time));
        s
    }
}

/// Fits the model, writes `measure.csv`, `report.txt` and the curve files
/// into the output directory and returns the report.
pub fn fit(args: &FitArgs) -> anyhow::Result<RunReport> {
    let started = Instant::now();
    let sample = ingest(&args.input, Some(args.model))?;
    let grid = build_grid(args.model, &sample, &args.grid)?;
    let eta = args.eta.unwrap_or(args.model.default_eta());
    let gridless = match args.model {
        ModelKind::ConvexLs => args.gridless,
        ModelKind::DeconvMl => !args.no_gridless,
    };
    let mut config = SolverConfig::new(grid.clone()).with_eta(eta);
    config.gridless = gridless;
    config.gridless_tol = args.gridless_tol;
    if let Some(m) = args.max_iter {
        match args.model {
            ModelKind::ConvexLs => config.max_outer_iter = m,
            ModelKind::DeconvMl => config.max_newton_iter = m,
        }
    }
    let max_iter = match args.model {
        ModelKind::ConvexLs => config.max_outer_iter,
        ModelKind::DeconvMl => config.max_newton_iter,
    };
    let tol = Tolerance {
        grid: eta,
        support: config.support_tol,
    };

    let outcome = match args.model {
        ModelKind::ConvexLs => {
            let model = LsModel::new(sample.clone())?;
            let (f, trace) = model.fit(&config)?;
            finish(&model, &config, f, trace.iterations(), trace.converged, args.model, tol)?
        }
        ModelKind::DeconvMl => {
            let model = MlModel::new(sample.clone());
            let (f, trace) = model.newton_solve(&config)?;
            finish(&model, &config, f, trace.iterations(), trace.converged, args.model, tol)?
        }
    };

    let report = RunReport {
        model: args.model,
        input: args.input.clone(),
        n: sample.len(),
        grid_min: grid.first(),
        grid_max: grid.last(),
        grid_size: grid.len(),
        eta,
        max_iter,
        gridless,
        gridless_tol: args.gridless_tol,
        converged: outcome.converged,
        outer_iterations: outcome.iterations,
        grid_support_size: outcome.grid_support_size,
        fine_tune_steps: outcome.fine_tune_steps,
        gradient_norm: outcome.gradient_norm,
        final_objective: outcome.objective,
        total_mass: outcome.measure.total_mass(),
        atoms: outcome.measure.atoms().to_vec(),
        certificate: outcome.certificate,
        wall_time: started.elapsed().as_secs_f64(),
    };

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    write(&args.out_dir.join("measure.csv"), &format_measure(&outcome.measure))?;
    write(&args.out_dir.join("report.txt"), &report.to_text())?;
    let curves = match args.model {
        ModelKind::ConvexLs => emit_curves(&LsModel::new(sample.clone())?, args.model, &outcome.measure, &sample, &grid),
        ModelKind::DeconvMl => emit_curves(&MlModel::new(sample.clone()), args.model, &outcome.measure, &sample, &grid),
    };
    for (name, body) in curves {
        write(&args.out_dir.join(name), &body)?;
    }
    Ok(report)
}

struct FitOutcome {
    measure: MixingMeasure,
    objective: f64,
    iterations: usize,
    grid_support_size: usize,
    fine_tune_steps: usize,
    gradient_norm: Option<f64>,
    converged: bool,
    certificate: Certificate,
}

fn finish<M>(
    model: &M,
    config: &SolverConfig,
    f: MixingMeasure,
    iterations: usize,
    grid_converged: bool,
    kind: ModelKind,
    tol: Tolerance,
) -> anyhow::Result<FitOutcome>
where
    M: ConeObjective + LocationObjective,
{
    let grid_support_size = f.len();
    let kind = kind.certificate_kind();
    let (measure, steps, gradient_norm, certificate, tuned) = if config.gridless && grid_converged {
        let (out, cert) = fine_tune_certified(model, &f, config, tol, kind)?;
        (out.measure, out.steps, Some(out.gradient_norm), cert, out.converged)
    } else {
        let cert = check_optimality(model, &f, &config.grid, tol, kind);
        (f, 0, None, cert, !config.gridless)
    };
    let converged = grid_converged && tuned && certificate.pass;
    Ok(FitOutcome {
        objective: model.location_objective(measure.atoms())?,
        measure,
        iterations,
        grid_support_size,
        fine_tune_steps: steps,
        gradient_norm,
        converged,
        certificate,
    })
}

fn write(path: &Path, body: &str) -> anyhow::Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// `CURVE_POINTS` equally spaced points on `[lo, hi]` widened by 10% of the
/// range on each side.
pub fn evaluation_grid(lo: f64, hi: f64) -> Vec<f64> {
    let pad = if hi > lo { 0.1 * (hi - lo) } else { 0.5 };
    let (a, b) = (lo - pad, hi + pad);
    let h = (b - a) / (CURVE_POINTS - 1) as f64;
    (0..CURVE_POINTS).map(|i| a + i as f64 * h).collect()
}

/// Gamma(3) distribution function.
fn gamma3_cdf(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        1.0 - (-t).exp() * (1.0 + t + 0.5 * t * t)
    }
}

fn exp_cdf(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        -(-t).exp_m1()
    }
}

/// Density of `Exp(1) ⊛ N(0, 1)`: `e^{½ − x} Φ(x − 1)`.
pub fn exp_normal_density(x: f64) -> f64 {
    (0.5 - x).exp() * std_normal_cdf(x - 1.0)
}

/// The four curve files: (a) mixing distribution, (b) mixture density,
/// (c) vertex derivative and (d) mixture distribution, each against its
/// reference. Curve (c) is sampled at the solver grid, where the
/// certificate is defined.
pub fn emit_curves<M: ConeObjective>(
    model: &M,
    kind: ModelKind,
    measure: &MixingMeasure,
    sample: &Sample,
    grid: &Grid,
) -> Vec<(&'static str, String)> {
    let atoms = measure.atoms();
    let theta_lo = grid.first().min(sample.min());
    let theta_hi = grid.last().max(sample.max());
    let mut a = String::from("theta,fitted_cdf,reference_cdf\n");
    for t in evaluation_grid(theta_lo, theta_hi) {
        let fitted: f64 = atoms.iter().filter(|at| at.location <= t).map(|at| at.weight).sum();
        let reference = match kind {
            ModelKind::ConvexLs => gamma3_cdf(t),
            ModelKind::DeconvMl => exp_cdf(t),
        };
        writeln!(a, "{t:.10e},{fitted:.10e},{reference:.10e}").unwrap();
    }

    let xs = evaluation_grid(sample.min(), sample.max());
    let mut b = String::from("x,fitted_density,true_density\n");
    let mut d = String::from("x,fitted_cdf,empirical_cdf\n");
    for &x in &xs {
        let (fitted, truth, cdf) = match kind {
            ModelKind::ConvexLs => (
                mixture_eval(&TriangularFamily, atoms, x),
                if x >= 0.0 { (-x).exp() } else { 0.0 },
                mixture_cdf(&TriangularFamily, atoms, x),
            ),
            ModelKind::DeconvMl => (
                mixture_eval(&GaussianFamily, atoms, x),
                exp_normal_density(x),
                mixture_cdf(&GaussianFamily, atoms, x),
            ),
        };
        writeln!(b, "{x:.10e},{fitted:.10e},{truth:.10e}").unwrap();
        writeln!(d, "{x:.10e},{cdf:.10e},{:.10e}", sample.ecdf(x)).unwrap();
    }

    let mut c = String::from("theta,dir_deriv\n");
    let scores = crate::solver::vertex_scores(model, atoms, grid.points(), kind.certificate_kind());
    for (t, v) in grid.points().iter().zip(scores) {
        writeln!(c, "{t:.10e},{v:.10e}").unwrap();
    }
    vec![
        ("curve_a_mixing_cdf.csv", a),
        ("curve_b_density.csv", b),
        ("curve_c_dir_deriv.csv", c),
        ("curve_d_cdf.csv", d),
    ]
}

/// Certificate of a stored measure against a sample.
pub fn check(args: &CheckArgs) -> anyhow::Result<Certificate> {
    let sample = ingest(&args.input, Some(args.model))?;
    let measure = read_measure(&args.measure)?;
    let grid = build_grid(args.model, &sample, &args.grid)?;
    let tol = Tolerance::uniform(args.tol);
    let cert = match args.model {
        ModelKind::ConvexLs => {
            check_optimality(&LsModel::new(sample)?, &measure, &grid, tol, args.model.certificate_kind())
        }
        ModelKind::DeconvMl => MlModel::new(sample).certificate(&measure, &grid, tol),
    };
    Ok(cert)
}

pub fn certificate_text(cert: &Certificate) -> String {
    format!(
        "certificate_kind: {}\ncertificate_min_grid_value: {:.6e}\ncertificate_argmin: {:.16e}\n\
         certificate_max_abs_support_value: {:.6e}\ncertificate_pass: {}\n",
        format!("{:?}", cert.kind).to_lowercase(),
        cert.min_grid_value,
        cert.argmin,
        cert.max_abs_support_value,
        cert.pass
    )
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    match &cli.command {
        Command::Simulate(a) => {
            if a.n == 0 {
                bail!("--n must be at least 1");
            }
            write(&a.out, &format_sample(&simulate(a.kind, a.n, a.seed)))?;
            Ok(0)
        }
        Command::Fit(a) => {
            let report = fit(a)?;
            print!("{}", report.to_text());
            Ok(if report.converged { 0 } else { 1 })
        }
        Command::Check(a) => {
            let cert = check(a)?;
            print!("{}", certificate_text(&cert));
            Ok(if cert.pass { 0 } else { 1 })
        }
    }
}
