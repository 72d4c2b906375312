//! The catalogue of reference tables and their computation.
//!
//! Ids are grouped by model and payoff: Black–Scholes call (1–3),
//! Stein–Stein call (4–6), Stein–Stein digital call (7–9), periodic cosine
//! call (10–12) and periodic cosine digital call (13–15), each as price,
//! Delta and Vega.

use uvol::baselines::{bs_delta, bs_digital_price, bs_price, euler_price, fd_greek, Bump, FdNoise};
use uvol::estimators::{estimate, Quantity};

use crate::config::{resolve, ConfigError, ModelName, PayoffName, SamplerName, Settings};
use crate::output::Row;
use crate::RunError;

/// A column group of a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    BsFormula,
    Euler,
    Exponential,
    Beta,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::BsFormula => "bs_formula",
            Method::Euler => "euler",
            Method::Exponential => "exponential",
            Method::Beta => "beta",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Method::BsFormula => "B-S formula",
            Method::Euler => "Euler",
            Method::Exponential => "Exponential",
            Method::Beta => "Beta",
        }
    }
}

/// First column(s) of a table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sweep {
    SigmaS(&'static [f64]),
    Pairs(&'static [(f64, f64)]),
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::SigmaS(v) => v.len(),
            Sweep::Pairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Settings fixing the spot-volatility parameters of point `i`.
    fn point(&self, i: usize) -> Settings {
        match self {
            Sweep::SigmaS(v) => Settings {
                sigma_s: Some(v[i]),
                ..Default::default()
            },
            Sweep::Pairs(v) => Settings {
                sigma1: Some(v[i].0),
                sigma2: Some(v[i].1),
                ..Default::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableSpec {
    pub id: u8,
    pub model: ModelName,
    pub quantity: Quantity,
    pub payoff: PayoffName,
    pub sweep: Sweep,
    pub methods: &'static [Method],
    pub caption: &'static str,
}

const BS_SIGMAS: &[f64] = &[0.25, 0.3, 0.4, 0.6];
const CALL_PAIRS: &[(f64, f64)] = &[(0.1, 0.15), (0.2, 0.25), (0.3, 0.4), (0.4, 0.5)];
const DIGITAL_PAIRS: &[(f64, f64)] =
    &[(0.0, 0.3), (0.1, 0.15), (0.2, 0.25), (0.3, 0.4), (0.4, 0.5)];

const WITH_FORMULA: &[Method] = &[
    Method::BsFormula,
    Method::Euler,
    Method::Exponential,
    Method::Beta,
];
const FORMULA_ONLY_MC: &[Method] = &[Method::BsFormula, Method::Exponential, Method::Beta];
const ALL_MC: &[Method] = &[Method::Euler, Method::Exponential, Method::Beta];

const QUANTITIES: [Quantity; 3] = [Quantity::Price, Quantity::Delta, Quantity::Vega];

pub fn quantity_name(q: Quantity) -> &'static str {
    match q {
        Quantity::Price => "price",
        Quantity::Delta => "delta",
        Quantity::Vega => "vega",
    }
}

/// Every table, in id order.
pub fn all_tables() -> Vec<TableSpec> {
    let mut out = Vec::with_capacity(15);
    for q in QUANTITIES {
        out.push(TableSpec {
            id: 0,
            model: ModelName::BlackScholes,
            quantity: q,
            payoff: PayoffName::Call,
            sweep: Sweep::SigmaS(BS_SIGMAS),
            // The Vega of the Black-Scholes model has no Euler column.
            methods: if q == Quantity::Vega {
                FORMULA_ONLY_MC
            } else {
                WITH_FORMULA
            },
            caption: "Call option, Black-Scholes model",
        });
    }
    let groups = [
        (
            ModelName::SteinStein,
            PayoffName::Call,
            CALL_PAIRS,
            "Call option, Stein-Stein model",
        ),
        (
            ModelName::SteinStein,
            PayoffName::Digital,
            DIGITAL_PAIRS,
            "Digital call option, Stein-Stein model",
        ),
        (
            ModelName::PeriodicCosine,
            PayoffName::Call,
            CALL_PAIRS,
            "Call option, sigma_S(y) = sigma1 cos(y) + sigma2",
        ),
        (
            ModelName::PeriodicCosine,
            PayoffName::Digital,
            DIGITAL_PAIRS,
            "Digital call option, sigma_S(y) = sigma1 cos(y) + sigma2",
        ),
    ];
    for (model, payoff, pairs, caption) in groups {
        for q in QUANTITIES {
            out.push(TableSpec {
                id: 0,
                model,
                quantity: q,
                payoff,
                sweep: Sweep::Pairs(pairs),
                methods: ALL_MC,
                caption,
            });
        }
    }
    for (i, t) in out.iter_mut().enumerate() {
        t.id = i as u8 + 1;
    }
    out
}

pub fn table_spec(id: u8) -> Option<TableSpec> {
    all_tables().into_iter().find(|t| t.id == id)
}

pub fn has_bs_formula(q: Quantity, payoff: PayoffName) -> bool {
    !(q == Quantity::Delta && payoff == PayoffName::Digital)
}

/// Closed-form Black–Scholes value of a quantity; the Vega in `y0` is 0.
pub fn bs_formula(
    q: Quantity,
    payoff: PayoffName,
    s0: f64,
    k: f64,
    r: f64,
    t: f64,
    sigma: f64,
) -> Option<f64> {
    match (q, payoff) {
        (Quantity::Price, PayoffName::Call) => Some(bs_price(s0, k, r, t, sigma)),
        (Quantity::Price, PayoffName::Digital) => Some(bs_digital_price(s0, k, r, t, sigma)),
        (Quantity::Delta, PayoffName::Call) => Some(bs_delta(s0, k, r, t, sigma)),
        (Quantity::Vega, _) => Some(0.0),
        (Quantity::Delta, PayoffName::Digital) => None,
    }
}

/// Computes one row. `base` must already carry the model, payoff and spot
/// volatility parameters.
pub fn method_row(base: &Settings, method: Method, q: Quantity) -> Result<(Row, u64), RunError> {
    let mut s = base.clone();
    match method {
        Method::Exponential => s.sampler = Some(SamplerName::Exponential),
        Method::Beta => s.sampler = Some(SamplerName::Beta),
        Method::BsFormula | Method::Euler => {}
    }
    let r = resolve(&s)?;
    let (sigma_s, sigma1, sigma2) = r.spot_params();
    let mut row = Row {
        method: method.as_str().to_string(),
        quantity: quantity_name(q).to_string(),
        model: r.model_name.as_str().to_string(),
        payoff: r.payoff_name.as_str().to_string(),
        sigma_s,
        sigma1,
        sigma2,
        mean: 0.0,
        std_error: 0.0,
        ci_lo: 0.0,
        ci_hi: 0.0,
        n_paths: 0,
        seconds: 0.0,
        seed: r.seed,
    };
    let mut negative = 0;
    let est = match method {
        Method::BsFormula => {
            let sigma = sigma_s
                .ok_or_else(|| ConfigError::new("model", "the B-S formula needs model bs"))?;
            let v = bs_formula(
                q,
                r.payoff_name,
                r.s0,
                r.payoff.strike(),
                r.kind.r,
                r.maturity,
                sigma,
            )
            .ok_or_else(|| ConfigError::new("payoff", "no closed form for the digital Delta"))?;
            let v = if r.discount {
                v
            } else {
                v * (r.kind.r * r.maturity).exp()
            };
            row.mean = v;
            row.ci_lo = v;
            row.ci_hi = v;
            return Ok((row, 0));
        }
        Method::Euler => {
            let (p, c) = (r.euler_problem(), r.euler_config());
            let run = match q {
                Quantity::Price => euler_price(&p, &c)?,
                Quantity::Delta => fd_greek(Bump::Delta, r.euler.fd_eps, &p, &c, FdNoise::Common)?,
                Quantity::Vega => fd_greek(Bump::Vega, r.euler.fd_eps, &p, &c, FdNoise::Common)?,
            };
            negative = run.negative_paths;
            run.estimate
        }
        Method::Exponential | Method::Beta => estimate(&r.run_config(), q)?,
    };
    row.mean = est.mean;
    row.std_error = est.std_error;
    row.ci_lo = est.ci95.0;
    row.ci_hi = est.ci95.1;
    row.n_paths = est.n_paths;
    row.seconds = est.elapsed;
    Ok((row, negative))
}

/// Result of a table run.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRun {
    pub spec: TableSpec,
    /// Row-major: sweep point, then method.
    pub rows: Vec<Row>,
    /// Euler paths whose spot went negative, summed over the table.
    pub negative_euler_paths: u64,
}

/// Runs every method at every sweep point. `base` supplies the shared
/// settings; the table fixes the model, payoff and sweep parameters.
pub fn run_table(spec: &TableSpec, base: &Settings) -> Result<TableRun, RunError> {
    let mut rows = Vec::with_capacity(spec.sweep.len() * spec.methods.len());
    let mut negative = 0;
    for i in 0..spec.sweep.len() {
        let fixed = Settings {
            model: Some(spec.model),
            payoff: Some(spec.payoff),
            ..spec.sweep.point(i)
        };
        let mut point = base.clone().overlay(fixed);
        if let Sweep::SigmaS(_) = spec.sweep {
            (point.sigma1, point.sigma2) = (None, None);
        } else {
            point.sigma_s = None;
        }
        for &m in spec.methods {
            let (row, neg) = method_row(&point, m, spec.quantity)?;
            negative += neg;
            rows.push(row);
        }
    }
    Ok(TableRun {
        spec: *spec,
        rows,
        negative_euler_paths: negative,
    })
}
