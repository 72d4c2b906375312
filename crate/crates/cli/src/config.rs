//! Run settings: a flat JSON file, command-line overrides and defaults.
//!
//! Every setting is optional until [`resolve`] fills the gaps with the
//! reference parameter set (`T = 0.5`, `r = 0.03`, `K = 1.5`, `x0 = 0.4`,
//! `y0 = 0.2`, `sigma_Y = 0.2`, `lambda_Y = 0.5`, `mu = 0.3`, `rho = 0.6`).
//! The model name and its spot-volatility parameters have no default.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Value};
use thiserror::Error;
use uvol::baselines::{EulerConfig, EulerProblem};
use uvol::estimators::{Payoff, RunConfig};
use uvol::model::{make_builtin, BuiltinModelKind, Model, SpotVol};
use uvol::renewal::JumpSampler;
use uvol::Error as CoreError;

pub const DEFAULT_MATURITY: f64 = 0.5;
pub const DEFAULT_RATE: f64 = 0.03;
pub const DEFAULT_STRIKE: f64 = 1.5;
pub const DEFAULT_X0: f64 = 0.4;
pub const DEFAULT_Y0: f64 = 0.2;
pub const DEFAULT_SIGMA_Y: f64 = 0.2;
pub const DEFAULT_LAMBDA_Y: f64 = 0.5;
pub const DEFAULT_MU: f64 = 0.3;
pub const DEFAULT_RHO: f64 = 0.6;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_TAU_BAR: f64 = 2.0;
pub const DEFAULT_PATHS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_EULER_STEPS: usize = 200;
pub const DEFAULT_EULER_PATHS: u64 = 160_000;
pub const DEFAULT_FD_EPS: f64 = 1e-2;

/// A missing or invalid configuration value.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("config key `{key}`: {reason}")]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelName {
    BlackScholes,
    SteinStein,
    PeriodicCosine,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::BlackScholes => "bs",
            ModelName::SteinStein => "stein",
            ModelName::PeriodicCosine => "cosine",
        }
    }
}

impl FromStr for ModelName {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "bs" | "black-scholes" | "black_scholes" => Ok(ModelName::BlackScholes),
            "stein" | "stein-stein" | "stein_stein" => Ok(ModelName::SteinStein),
            "cosine" | "periodic-cosine" | "periodic_cosine" => Ok(ModelName::PeriodicCosine),
            _ => Err(ConfigError::new(
                "model",
                format!("unknown model {s:?}, expected bs, stein or cosine"),
            )),
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayoffName {
    Call,
    Digital,
}

impl PayoffName {
    pub fn as_str(self) -> &'static str {
        match self {
            PayoffName::Call => "call",
            PayoffName::Digital => "digital",
        }
    }

    pub fn with_strike(self, strike: f64) -> Payoff {
        match self {
            PayoffName::Call => Payoff::Call { strike },
            PayoffName::Digital => Payoff::DigitalCall { strike },
        }
    }
}

impl FromStr for PayoffName {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "call" => Ok(PayoffName::Call),
            "digital" | "digital-call" | "digital_call" => Ok(PayoffName::Digital),
            _ => Err(ConfigError::new(
                "payoff",
                format!("unknown payoff {s:?}, expected call or digital"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerName {
    Exponential,
    Beta,
}

impl SamplerName {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerName::Exponential => "exponential",
            SamplerName::Beta => "beta",
        }
    }
}

impl FromStr for SamplerName {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(SamplerName::Exponential),
            "beta" => Ok(SamplerName::Beta),
            _ => Err(ConfigError::new(
                "sampler",
                format!("unknown sampler {s:?}, expected exponential or beta"),
            )),
        }
    }
}

/// Partially specified settings. `None` means "not given".
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub model: Option<ModelName>,
    pub payoff: Option<PayoffName>,
    pub sampler: Option<SamplerName>,
    pub s0: Option<f64>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub maturity: Option<f64>,
    pub r: Option<f64>,
    pub strike: Option<f64>,
    pub sigma_s: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub sigma_y: Option<f64>,
    pub lambda_y: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub tau_bar: Option<f64>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub discount: Option<bool>,
    pub euler_steps: Option<usize>,
    pub euler_paths: Option<u64>,
    pub fd_eps: Option<f64>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    /// Field-wise merge in which values of `top` win.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay_fields!(base, top; model, payoff, sampler, s0, x0, y0, maturity, r, strike,
            sigma_s, sigma1, sigma2, sigma_y, lambda_y, mu, rho, lambda, alpha, tau_bar,
            paths, seed, threads, discount, euler_steps, euler_paths, fd_eps)
    }
}

/// Parses a count such as `1000000` or `1e6`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a count"))?;
    count_from_f64(v).ok_or_else(|| format!("{s:?} is not a non-negative integer"))
}

fn count_from_f64(v: f64) -> Option<u64> {
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 1.8e19).then_some(v as u64)
}

fn json_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64()
        .ok_or_else(|| ConfigError::new(key, format!("expected a number, got {v}")))
}

fn json_count(key: &str, v: &Value) -> Result<u64, ConfigError> {
    if let Some(n) = v.as_u64() {
        return Ok(n);
    }
    v.as_f64()
        .and_then(count_from_f64)
        .ok_or_else(|| ConfigError::new(key, format!("expected a non-negative integer, got {v}")))
}

fn json_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str()
        .ok_or_else(|| ConfigError::new(key, format!("expected a string, got {v}")))
}

fn json_bool(key: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool()
        .ok_or_else(|| ConfigError::new(key, format!("expected true or false, got {v}")))
}

fn from_object(obj: &Map<String, Value>) -> Result<Settings, ConfigError> {
    let mut s = Settings::default();
    for (key, v) in obj {
        let k = key.as_str();
        match k {
            "model" => s.model = Some(json_str(k, v)?.parse()?),
            "payoff" => s.payoff = Some(json_str(k, v)?.parse()?),
            "sampler" => s.sampler = Some(json_str(k, v)?.parse()?),
            "s0" => s.s0 = Some(json_f64(k, v)?),
            "x0" => s.x0 = Some(json_f64(k, v)?),
            "y0" => s.y0 = Some(json_f64(k, v)?),
            "T" | "maturity" => s.maturity = Some(json_f64(k, v)?),
            "r" => s.r = Some(json_f64(k, v)?),
            "K" | "strike" => s.strike = Some(json_f64(k, v)?),
            "sigma_s" => s.sigma_s = Some(json_f64(k, v)?),
            "sigma1" => s.sigma1 = Some(json_f64(k, v)?),
            "sigma2" => s.sigma2 = Some(json_f64(k, v)?),
            "sigma_y" => s.sigma_y = Some(json_f64(k, v)?),
            "lambda_y" => s.lambda_y = Some(json_f64(k, v)?),
            "mu" => s.mu = Some(json_f64(k, v)?),
            "rho" => s.rho = Some(json_f64(k, v)?),
            "lambda" => s.lambda = Some(json_f64(k, v)?),
            "alpha" => s.alpha = Some(json_f64(k, v)?),
            "tau_bar" => s.tau_bar = Some(json_f64(k, v)?),
            "paths" => s.paths = Some(json_count(k, v)?),
            "seed" => s.seed = Some(json_count(k, v)?),
            "threads" => s.threads = Some(json_count(k, v)? as usize),
            "discount" => s.discount = Some(json_bool(k, v)?),
            "euler_steps" => s.euler_steps = Some(json_count(k, v)? as usize),
            "euler_paths" => s.euler_paths = Some(json_count(k, v)?),
            "fd_eps" => s.fd_eps = Some(json_f64(k, v)?),
            _ => return Err(ConfigError::new(k, "unknown key")),
        }
    }
    Ok(s)
}

/// Parses a JSON object of flat keys. Blank text is an empty object.
pub fn settings_from_json(text: &str) -> Result<Settings, ConfigError> {
    if text.trim().is_empty() {
        return Ok(Settings::default());
    }
    let v: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::new("config", format!("invalid JSON: {e}")))?;
    match v {
        Value::Object(obj) => from_object(&obj),
        other => Err(ConfigError::new(
            "config",
            format!("expected a JSON object, got {other}"),
        )),
    }
}

/// Reads settings from a JSON file.
pub fn load_settings(path: &Path) -> Result<Settings, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
    settings_from_json(&text)
}

/// Parameters of the Euler and finite-difference baselines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerSettings {
    pub steps: usize,
    pub paths: u64,
    pub fd_eps: f64,
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub model_name: ModelName,
    pub kind: BuiltinModelKind,
    pub model: Model,
    pub payoff_name: PayoffName,
    pub payoff: Payoff,
    pub sampler_name: SamplerName,
    pub sampler: JumpSampler,
    pub s0: f64,
    pub y0: f64,
    pub maturity: f64,
    pub paths: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub discount: bool,
    pub euler: EulerSettings,
}

impl Resolved {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            model: self.model.clone(),
            payoff: self.payoff,
            sampler: self.sampler,
            s0: self.s0,
            y0: self.y0,
            maturity: self.maturity,
            n_paths: self.paths,
            seed: self.seed,
            discount: self.discount,
            threads: self.threads,
        }
    }

    pub fn euler_problem(&self) -> EulerProblem {
        EulerProblem {
            model: self.model.clone(),
            payoff: self.payoff,
            s0: self.s0,
            y0: self.y0,
            maturity: self.maturity,
            discount: self.discount,
        }
    }

    pub fn euler_config(&self) -> EulerConfig {
        EulerConfig {
            n_steps: self.euler.steps,
            n_paths: self.euler.paths,
            seed: self.seed,
            threads: self.threads,
        }
    }

    /// The spot-volatility parameters as `(sigma_s, sigma1, sigma2)`.
    pub fn spot_params(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        match self.kind.spot {
            SpotVol::BlackScholes { sigma } => (Some(sigma), None, None),
            SpotVol::SteinStein { sigma1, sigma2 } | SpotVol::PeriodicCosine { sigma1, sigma2 } => {
                (None, Some(sigma1), Some(sigma2))
            }
        }
    }
}

fn required(key: &str, v: Option<f64>) -> Result<f64, ConfigError> {
    v.ok_or_else(|| ConfigError::new(key, "missing"))
}

/// Converts an engine parameter error into a configuration error.
pub fn core_config_error(e: &CoreError) -> Option<ConfigError> {
    match e {
        CoreError::Parameter { name, reason } => Some(ConfigError::new(*name, reason.clone())),
        CoreError::UnsupportedModel(m) => Some(ConfigError::new("model", m.clone())),
        _ => None,
    }
}

fn lift(e: CoreError) -> ConfigError {
    core_config_error(&e).unwrap_or_else(|| ConfigError::new("config", e.to_string()))
}

/// Fills defaults and builds the model and sampler.
pub fn resolve(s: &Settings) -> Result<Resolved, ConfigError> {
    let model_name = s
        .model
        .ok_or_else(|| ConfigError::new("model", "missing"))?;
    let spot = match model_name {
        ModelName::BlackScholes => SpotVol::BlackScholes {
            sigma: required("sigma_s", s.sigma_s)?,
        },
        ModelName::SteinStein => SpotVol::SteinStein {
            sigma1: required("sigma1", s.sigma1)?,
            sigma2: required("sigma2", s.sigma2)?,
        },
        ModelName::PeriodicCosine => SpotVol::PeriodicCosine {
            sigma1: required("sigma1", s.sigma1)?,
            sigma2: required("sigma2", s.sigma2)?,
        },
    };
    let kind = BuiltinModelKind {
        spot,
        lambda_y: s.lambda_y.unwrap_or(DEFAULT_LAMBDA_Y),
        mu: s.mu.unwrap_or(DEFAULT_MU),
        sigma_y: s.sigma_y.unwrap_or(DEFAULT_SIGMA_Y),
        rho: s.rho.unwrap_or(DEFAULT_RHO),
        r: s.r.unwrap_or(DEFAULT_RATE),
    };
    let model = make_builtin(kind).map_err(lift)?;

    let sampler_name = s.sampler.unwrap_or(SamplerName::Beta);
    let sampler = match sampler_name {
        SamplerName::Exponential => JumpSampler::exponential(s.lambda.unwrap_or(DEFAULT_LAMBDA)),
        SamplerName::Beta => JumpSampler::beta(
            s.alpha.unwrap_or(DEFAULT_ALPHA),
            s.tau_bar.unwrap_or(DEFAULT_TAU_BAR),
        ),
    }
    .map_err(lift)?;

    let s0 = match (s.s0, s.x0) {
        (Some(_), Some(_)) => return Err(ConfigError::new("s0", "give either s0 or x0, not both")),
        (Some(s0), None) => s0,
        (None, x0) => x0.unwrap_or(DEFAULT_X0).exp(),
    };
    let payoff_name = s.payoff.unwrap_or(PayoffName::Call);
    let fd_eps = s.fd_eps.unwrap_or(DEFAULT_FD_EPS);
    if !(fd_eps.is_finite() && fd_eps > 0.0) {
        return Err(ConfigError::new(
            "fd_eps",
            format!("must be positive, got {fd_eps}"),
        ));
    }
    let euler = EulerSettings {
        steps: s.euler_steps.unwrap_or(DEFAULT_EULER_STEPS),
        paths: s.euler_paths.unwrap_or(DEFAULT_EULER_PATHS),
        fd_eps,
    };
    if euler.steps == 0 {
        return Err(ConfigError::new("euler_steps", "must be at least 1"));
    }
    if euler.paths == 0 {
        return Err(ConfigError::new("euler_paths", "must be at least 1"));
    }

    let r = Resolved {
        model_name,
        kind,
        model,
        payoff_name,
        payoff: payoff_name.with_strike(s.strike.unwrap_or(DEFAULT_STRIKE)),
        sampler_name,
        sampler,
        s0,
        y0: s.y0.unwrap_or(DEFAULT_Y0),
        maturity: s.maturity.unwrap_or(DEFAULT_MATURITY),
        paths: s.paths.unwrap_or(DEFAULT_PATHS),
        seed: s.seed.unwrap_or(DEFAULT_SEED),
        threads: s.threads,
        discount: s.discount.unwrap_or(true),
        euler,
    };
    r.run_config().validate().map_err(lift)?;
    Ok(r)
}
