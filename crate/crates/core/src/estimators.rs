//! Monte Carlo drivers for the unbiased price, Delta and Vega.
//!
//! Paths are grouped in fixed-size chunks that run in parallel. Each path
//! draws from its own counter-based stream, and chunk statistics are merged
//! in chunk order, so the result is bit-identical for any thread count.

use std::time::Instant;

use rayon::prelude::*;

use crate::chain::{simulate_chain, ChainPath};
use crate::error::{param, Error, Result};
use crate::model::Model;
use crate::renewal::{sample_grid, JumpSampler};
use crate::rng::path_stream;
use crate::weights::{path_weights, Need, WeightContext};

/// Paths per parallel work unit. Fixed so that chunking never depends on
/// the thread count.
pub const CHUNK_SIZE: u64 = 4096;

/// European payoff on the terminal log-spot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Payoff {
    Call { strike: f64 },
    DigitalCall { strike: f64 },
}

impl Payoff {
    pub fn strike(&self) -> f64 {
        match *self {
            Payoff::Call { strike } | Payoff::DigitalCall { strike } => strike,
        }
    }

    /// Payoff of the spot `s`.
    #[inline]
    pub fn of_spot(&self, s: f64) -> f64 {
        match *self {
            Payoff::Call { strike } => (s - strike).max(0.0),
            Payoff::DigitalCall { strike } => {
                if s >= strike {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Payoff of the log-spot `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.of_spot(x.exp())
    }
}

/// Mean, standard error and 95% interval of a Monte Carlo run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateResult {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub n_paths: u64,
    pub n_jumps_mean: f64,
    /// Wall-clock seconds.
    pub elapsed: f64,
}

impl EstimateResult {
    /// Unbiased sample variance of the path contributions.
    pub fn sample_variance(&self) -> f64 {
        self.std_error * self.std_error * self.n_paths as f64
    }

    fn scaled(mut self, c: f64) -> Self {
        self.mean *= c;
        self.std_error *= c.abs();
        self.ci95 = ci(self.mean, self.std_error);
        self
    }
}

fn ci(mean: f64, se: f64) -> (f64, f64) {
    (mean - 1.96 * se, mean + 1.96 * se)
}

/// Streaming sample statistics (count, mean, sum of squared deviations).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Partial {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Partial {
    /// From raw sums `sum x`, `sum x^2` over `count` samples.
    pub fn from_sums(sum: f64, sum_sq: f64, count: u64) -> Self {
        if count == 0 {
            return Self::default();
        }
        let mean = sum / count as f64;
        Self {
            count,
            mean,
            m2: (sum_sq - sum * mean).max(0.0),
        }
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&self, o: &Partial) -> Partial {
        if self.count == 0 {
            return *o;
        }
        if o.count == 0 {
            return *self;
        }
        let n = self.count + o.count;
        let d = o.mean - self.mean;
        let (na, nb) = (self.count as f64, o.count as f64);
        Partial {
            count: n,
            mean: self.mean + d * nb / n as f64,
            m2: self.m2 + o.m2 + d * d * na * nb / n as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn result(&self) -> EstimateResult {
        let se = if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        };
        EstimateResult {
            mean: self.mean,
            std_error: se,
            ci95: ci(self.mean, se),
            n_paths: self.count,
            n_jumps_mean: 0.0,
            elapsed: 0.0,
        }
    }
}

/// Merges `(sum, sum_sq, count)` triples into one result.
pub fn aggregate(partials: &[(f64, f64, u64)]) -> EstimateResult {
    partials
        .iter()
        .map(|&(s, s2, n)| Partial::from_sums(s, s2, n))
        .fold(Partial::default(), |a, b| a.merge(&b))
        .result()
}

/// Everything needed to run the unbiased estimators.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: Model,
    pub payoff: Payoff,
    pub sampler: JumpSampler,
    pub s0: f64,
    pub y0: f64,
    pub maturity: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Multiply by `exp(-r T)`.
    pub discount: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn x0(&self) -> f64 {
        self.s0.ln()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(param("s0", format!("must be positive, got {}", self.s0)));
        }
        if !self.y0.is_finite() {
            return Err(param("y0", "must be finite"));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(param(
                "T",
                format!("must be positive, got {}", self.maturity),
            ));
        }
        if self.n_paths == 0 {
            return Err(param("paths", "must be at least 1"));
        }
        if !(self.payoff.strike().is_finite() && self.payoff.strike() > 0.0) {
            return Err(param("strike", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(param("threads", "must be at least 1"));
        }
        Ok(())
    }

    fn discount_factor(&self) -> f64 {
        if self.discount {
            (-self.model.r * self.maturity).exp()
        } else {
            1.0
        }
    }
}

/// Undiscounted, unnormalized contributions of one path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contribution {
    pub price: f64,
    /// Payoff times the Delta product weight (before dividing by `s0 T`).
    pub delta: f64,
    /// Payoff times the Vega product weight (before dividing by `T`).
    pub vega: f64,
}

/// Which estimators a run evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Price,
    Delta,
    Vega,
}

/// Contributions of an already simulated path.
///
/// Exposed so that tests can feed hand-built paths (fixed grid and normals).
#[doc(hidden)]
pub fn path_contribution(
    ctx: &WeightContext<'_>,
    payoff: &Payoff,
    path: &ChainPath,
    greeks: bool,
) -> Result<Contribution> {
    let h = payoff.eval(path.terminal().0);
    if h == 0.0 {
        // Weights are finite for valid steps, so a zero payoff contributes 0.
        return Ok(Contribution {
            price: 0.0,
            delta: 0.0,
            vega: 0.0,
        });
    }
    let need = if greeks { Need::All } else { Need::Price };
    let w = path_weights(ctx, path, need)?;
    Ok(if greeks {
        Contribution {
            price: h * w.price(),
            delta: h * w.delta(),
            vega: h * w.vega(),
        }
    } else {
        Contribution {
            price: h * w.price(),
            delta: f64::NAN,
            vega: f64::NAN,
        }
    })
}

/// Price, Delta and Vega estimated from the same paths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimates {
    pub price: EstimateResult,
    pub delta: EstimateResult,
    pub vega: EstimateResult,
}

#[derive(Clone, Copy, Default)]
struct ChunkStats {
    price: Partial,
    delta: Partial,
    vega: Partial,
    jumps: u64,
}

fn run_chunk(
    cfg: &RunConfig,
    ctx: &WeightContext<'_>,
    chunk: u64,
    greeks: bool,
) -> Result<ChunkStats> {
    let start = chunk * CHUNK_SIZE;
    let end = (start + CHUNK_SIZE).min(cfg.n_paths);
    let x0 = cfg.x0();
    let mut st = ChunkStats::default();
    for path_idx in start..end {
        let mut rng = path_stream(cfg.seed, path_idx);
        let grid = sample_grid(ctx.sampler, cfg.maturity, &mut rng);
        st.jumps += grid.n_jumps() as u64;
        let n_jumps = grid.n_jumps();
        let path = simulate_chain(ctx.model, x0, cfg.y0, grid, &mut rng)?;
        let c = path_contribution(ctx, &cfg.payoff, &path, greeks)?;
        let bad = |quantity| Error::NonFinitePath {
            path: path_idx,
            quantity,
            n_jumps,
        };
        if !c.price.is_finite() {
            return Err(bad("price"));
        }
        st.price.push(c.price);
        if greeks {
            if !c.delta.is_finite() {
                return Err(bad("delta"));
            }
            if !c.vega.is_finite() {
                return Err(bad("vega"));
            }
            st.delta.push(c.delta);
            st.vega.push(c.vega);
        }
    }
    Ok(st)
}

/// Runs `f` on a dedicated pool when a thread count is requested.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| param("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn run(cfg: &RunConfig, greeks: bool) -> Result<Estimates> {
    cfg.validate()?;
    let ctx = WeightContext::new(&cfg.model, &cfg.sampler)?;
    let t0 = Instant::now();
    let n_chunks = cfg.n_paths.div_ceil(CHUNK_SIZE);
    let chunks: Vec<Result<ChunkStats>> = with_threads(cfg.threads, || {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| run_chunk(cfg, &ctx, c, greeks))
            .collect()
    })?;
    let mut total = ChunkStats::default();
    for c in chunks {
        let c = c?;
        total.price = total.price.merge(&c.price);
        total.delta = total.delta.merge(&c.delta);
        total.vega = total.vega.merge(&c.vega);
        total.jumps += c.jumps;
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let disc = cfg.discount_factor();
    let finish = |p: &Partial, scale: f64| {
        let mut r = p.result().scaled(disc * scale);
        r.n_paths = cfg.n_paths;
        r.n_jumps_mean = total.jumps as f64 / cfg.n_paths as f64;
        r.elapsed = elapsed;
        r
    };
    let price = finish(&total.price, 1.0);
    let (delta, vega) = if greeks {
        (
            finish(&total.delta, 1.0 / (cfg.s0 * cfg.maturity)),
            finish(&total.vega, 1.0 / cfg.maturity),
        )
    } else {
        let nan = EstimateResult {
            mean: f64::NAN,
            std_error: f64::NAN,
            ci95: (f64::NAN, f64::NAN),
            ..price
        };
        (nan, nan)
    };
    Ok(Estimates { price, delta, vega })
}

/// Unbiased estimate of `E[e^{-rT} h(S_T)]`.
pub fn estimate_price(cfg: &RunConfig) -> Result<EstimateResult> {
    run(cfg, false).map(|e| e.price)
}

/// Unbiased estimate of the derivative in `s0`.
pub fn estimate_delta(cfg: &RunConfig) -> Result<EstimateResult> {
    run(cfg, true).map(|e| e.delta)
}

/// Unbiased estimate of the derivative in `y0`.
pub fn estimate_vega(cfg: &RunConfig) -> Result<EstimateResult> {
    run(cfg, true).map(|e| e.vega)
}

/// Price, Delta and Vega from one set of paths.
pub fn estimate_all(cfg: &RunConfig) -> Result<Estimates> {
    run(cfg, true)
}

/// Runs the estimator for a single quantity.
pub fn estimate(cfg: &RunConfig, q: Quantity) -> Result<EstimateResult> {
    match q {
        Quantity::Price => estimate_price(cfg),
        Quantity::Delta => estimate_delta(cfg),
        Quantity::Vega => estimate_vega(cfg),
    }
}
