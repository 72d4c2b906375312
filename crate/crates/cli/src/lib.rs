//! Command-line front end of the `uvol` engine.
//!
//! Subcommands `price`, `delta` and `vega` run one estimator, `table`
//! reproduces a reference table and `validate` checks the model assumptions.
//! Exit codes: 0 on success, 2 on a configuration error, 3 on a numerical
//! failure.

pub mod config;
pub mod output;
pub mod tables;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;
use uvol::estimators::Quantity;
use uvol::model::{validate_model, SpotVol};

use config::{
    core_config_error, load_settings, parse_count, resolve, ConfigError, ModelName, Settings,
};
use output::{render_rows, render_table, write_csv, Row};
use tables::{method_row, run_table, table_spec, Method};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Failure of a command.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical error: {0}")]
    Numerical(uvol::Error),
}

impl From<uvol::Error> for RunError {
    fn from(e: uvol::Error) -> Self {
        match core_config_error(&e) {
            Some(c) => RunError::Config(c),
            None => RunError::Numerical(e),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "uvol",
    version,
    about = "Unbiased Monte Carlo prices and Greeks for stochastic volatility models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the option price.
    Price(RunArgs),
    /// Estimate the Delta (derivative in the initial spot).
    Delta(RunArgs),
    /// Estimate the Vega (derivative in the initial volatility factor).
    Vega(RunArgs),
    /// Reproduce a reference table (ids 1 to 15).
    Table(TableArgs),
    /// Check the ellipticity and smoothness assumptions of a model.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Also run the Euler baseline (finite differences for Greeks) and, for
    /// the Black-Scholes model, the closed form.
    #[arg(long)]
    compare_euler: bool,
    /// Write the result rows to this CSV file.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TableArgs {
    /// Table id.
    #[arg(long)]
    id: u8,
    #[command(flatten)]
    params: ParamArgs,
    /// Write the result rows to this CSV file.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    params: ParamArgs,
}

/// Settings flags. Each one overrides the same key of the `--config` file.
#[derive(Debug, Args)]
struct ParamArgs {
    /// JSON file of settings (flat object, same key names as the flags with
    /// underscores; `T` and `K` for maturity and strike).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Model: bs, stein or cosine. Required.
    #[arg(long)]
    model: Option<String>,
    /// Payoff: call or digital [default: call].
    #[arg(long)]
    payoff: Option<String>,
    /// Jump-time law: exponential or beta [default: beta].
    #[arg(long)]
    sampler: Option<String>,
    /// Constant spot volatility of the bs model.
    #[arg(long)]
    sigma_s: Option<f64>,
    /// Slope of the spot volatility of the stein and cosine models.
    #[arg(long)]
    sigma1: Option<f64>,
    /// Level of the spot volatility of the stein and cosine models.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Initial spot [default: exp(x0)].
    #[arg(long)]
    s0: Option<f64>,
    /// Initial log-spot [default: 0.4].
    #[arg(long)]
    x0: Option<f64>,
    /// Initial volatility factor [default: 0.2].
    #[arg(long)]
    y0: Option<f64>,
    /// Maturity T [default: 0.5].
    #[arg(long, visible_alias = "T")]
    maturity: Option<f64>,
    /// Interest rate [default: 0.03].
    #[arg(long)]
    r: Option<f64>,
    /// Strike K [default: 1.5].
    #[arg(long, visible_alias = "K")]
    strike: Option<f64>,
    /// Vol-of-vol [default: 0.2].
    #[arg(long)]
    sigma_y: Option<f64>,
    /// Mean-reversion speed of the volatility factor [default: 0.5].
    #[arg(long)]
    lambda_y: Option<f64>,
    /// Mean-reversion level of the volatility factor [default: 0.3].
    #[arg(long)]
    mu: Option<f64>,
    /// Correlation of the two Brownian motions [default: 0.6].
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Rate of the exponential sampler [default: 0.5].
    #[arg(long)]
    lambda: Option<f64>,
    /// Exponent of the beta sampler density t^(-alpha) [default: 0.1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Support bound of the beta sampler [default: 2].
    #[arg(long)]
    tau_bar: Option<f64>,
    /// Monte Carlo paths, e.g. 1000000 or 1e6 [default: 1e6].
    #[arg(long, value_parser = parse_count)]
    paths: Option<u64>,
    /// Seed of the random streams [default: 1].
    #[arg(long, value_parser = parse_count)]
    seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, env = "UVOL_THREADS")]
    threads: Option<usize>,
    /// Report undiscounted values.
    #[arg(long)]
    no_discount: bool,
    /// Euler time steps [default: 200].
    #[arg(long)]
    euler_steps: Option<usize>,
    /// Euler paths [default: 160000].
    #[arg(long, value_parser = parse_count)]
    euler_paths: Option<u64>,
    /// Finite-difference bump of the Euler Greeks [default: 0.01].
    #[arg(long)]
    fd_eps: Option<f64>,
}

impl ParamArgs {
    /// File settings overlaid with the flags.
    fn settings(&self) -> Result<Settings, ConfigError> {
        let file = match &self.config {
            Some(p) => load_settings(p)?,
            None => Settings::default(),
        };
        let flags = Settings {
            model: self.model.as_deref().map(str::parse).transpose()?,
            payoff: self.payoff.as_deref().map(str::parse).transpose()?,
            sampler: self.sampler.as_deref().map(str::parse).transpose()?,
            s0: self.s0,
            x0: self.x0,
            y0: self.y0,
            maturity: self.maturity,
            r: self.r,
            strike: self.strike,
            sigma_s: self.sigma_s,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            sigma_y: self.sigma_y,
            lambda_y: self.lambda_y,
            mu: self.mu,
            rho: self.rho,
            lambda: self.lambda,
            alpha: self.alpha,
            tau_bar: self.tau_bar,
            paths: self.paths,
            seed: self.seed,
            threads: self.threads,
            discount: self.no_discount.then_some(false),
            euler_steps: self.euler_steps,
            euler_paths: self.euler_paths,
            fd_eps: self.fd_eps,
        };
        Ok(file.overlay(flags))
    }
}

fn save_csv(path: &Option<PathBuf>, rows: &[Row]) -> Result<(), RunError> {
    if let Some(p) = path {
        write_csv(p, rows)
            .map_err(|e| ConfigError::new("csv", format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn negative_note(out: &mut String, n: u64) {
    if n > 0 {
        out.push_str(&format!("note: {n} Euler paths had a negative spot\n"));
    }
}

fn run_single(args: &RunArgs, q: Quantity) -> Result<String, RunError> {
    let s = args.params.settings()?;
    let r = resolve(&s)?;
    let main = match r.sampler_name {
        config::SamplerName::Exponential => Method::Exponential,
        config::SamplerName::Beta => Method::Beta,
    };
    let mut methods = vec![main];
    if args.compare_euler {
        methods.push(Method::Euler);
        if r.model_name == ModelName::BlackScholes && tables::has_bs_formula(q, r.payoff_name) {
            methods.insert(0, Method::BsFormula);
        }
    }
    let mut rows = Vec::new();
    let mut negative = 0;
    for m in methods {
        let (row, neg) = method_row(&s, m, q)?;
        negative += neg;
        rows.push(row);
    }
    save_csv(&args.csv, &rows)?;
    let mut out = render_rows(&rows);
    negative_note(&mut out, negative);
    Ok(out)
}

fn run_table_cmd(args: &TableArgs) -> Result<String, RunError> {
    let spec = table_spec(args.id)
        .ok_or_else(|| ConfigError::new("id", format!("no table {}, ids are 1 to 15", args.id)))?;
    let base = args.params.settings()?;
    let t = run_table(&spec, &base)?;
    save_csv(&args.csv, &t.rows)?;
    let mut out = render_table(&t);
    negative_note(&mut out, t.negative_euler_paths);
    Ok(out)
}

/// Half-width of the validation grid in stationary standard deviations of
/// the volatility factor. Wider than the band used to pick `kappa`.
const VALIDATION_SDS: f64 = 10.0;
const VALIDATION_POINTS: usize = 2001;

fn run_validate(args: &ValidateArgs) -> Result<String, RunError> {
    let r = resolve(&args.params.settings()?)?;
    let k = &r.kind;
    let half = VALIDATION_SDS * k.sigma_y / (2.0 * k.lambda_y).sqrt();
    let (lo, hi) = (k.mu - half, k.mu + half);
    let grid: Vec<f64> = (0..VALIDATION_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (VALIDATION_POINTS - 1) as f64)
        .collect();
    let rep = validate_model(&r.model, &grid);
    let mut out = format!(
        "model {} on y in [{lo:.4}, {hi:.4}] ({} points), kappa = {:.6}\n",
        r.model_name, VALIDATION_POINTS, r.model.kappa
    );
    out.push_str(&format!(
        "sigma_S^2 in [{:.6e}, {:.6e}]\n",
        rep.min_sigma_s_sq, rep.max_sigma_s_sq
    ));
    out.push_str(&format!(
        "sigma_Y^2 in [{:.6e}, {:.6e}]\n",
        rep.min_sigma_y_sq, rep.max_sigma_y_sq
    ));
    out.push_str(&format!(
        "max derivative error {:.3e}\n",
        rep.max_derivative_error
    ));
    let mut warnings = rep.warnings.clone();
    if let SpotVol::SteinStein { sigma1, sigma2 } = k.spot {
        if sigma1 != 0.0 {
            warnings.push(format!(
                "sigma_S(y) = {sigma1} y + {sigma2} is unbounded and vanishes at y = {:.6}: \
                 the non-degeneracy (ND) condition cannot hold on the whole line",
                -sigma2 / sigma1
            ));
        }
    }
    for w in &warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    if warnings.is_empty() {
        out.push_str("ok: all checks passed\n");
    }
    Ok(out)
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Results go to stdout and errors to stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Price(a) => run_single(a, Quantity::Price),
        Command::Delta(a) => run_single(a, Quantity::Delta),
        Command::Vega(a) => run_single(a, Quantity::Vega),
        Command::Table(a) => run_table_cmd(a),
        Command::Validate(a) => run_validate(a),
    };
    match result {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
