//! Reference methods: Euler–Maruyama Monte Carlo, forward finite-difference
//! Greeks and the Black–Scholes formulas.

use std::time::Instant;

use libm::erfc;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{param, Result};
use crate::estimators::{with_threads, EstimateResult, Partial, Payoff, CHUNK_SIZE};
use crate::model::Model;
use crate::rng::path_stream;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn d1_d2(s0: f64, k: f64, r: f64, t: f64, sigma: f64) -> (f64, f64) {
    let sd = sigma * t.sqrt();
    let d1 = ((s0 / k).ln() + (r + 0.5 * sigma * sigma) * t) / sd;
    (d1, d1 - sd)
}

/// Black–Scholes call price.
pub fn bs_price(s0: f64, k: f64, r: f64, t: f64, sigma: f64) -> f64 {
    let (d1, d2) = d1_d2(s0, k, r, t, sigma);
    s0 * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2)
}

/// Black–Scholes call Delta.
pub fn bs_delta(s0: f64, k: f64, r: f64, t: f64, sigma: f64) -> f64 {
    norm_cdf(d1_d2(s0, k, r, t, sigma).0)
}

/// Black–Scholes cash-or-nothing digital call price.
pub fn bs_digital_price(s0: f64, k: f64, r: f64, t: f64, sigma: f64) -> f64 {
    (-r * t).exp() * norm_cdf(d1_d2(s0, k, r, t, sigma).1)
}

/// Discretization and sampling settings of the Euler baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerConfig {
    pub n_steps: usize,
    pub n_paths: u64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl EulerConfig {
    fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(param("euler_steps", "must be at least 1"));
        }
        if self.n_paths == 0 {
            return Err(param("euler_paths", "must be at least 1"));
        }
        Ok(())
    }
}

/// Pricing problem shared by the Euler runs.
#[derive(Clone, Debug)]
pub struct EulerProblem {
    pub model: Model,
    pub payoff: Payoff,
    pub s0: f64,
    pub y0: f64,
    pub maturity: f64,
    pub discount: bool,
}

/// An Euler estimate with the number of paths whose spot went negative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerRun {
    pub estimate: EstimateResult,
    pub negative_paths: u64,
}

/// One Euler step of the original SDE driven by independent normals
/// `g1`, `g2`.
pub fn euler_step(m: &Model, s: f64, y: f64, dt: f64, g1: f64, g2: f64) -> (f64, f64) {
    let sdt = dt.sqrt();
    let dw = sdt * g1;
    let db = sdt * (m.rho * g1 + (1.0 - m.rho * m.rho).sqrt() * g2);
    (
        s + m.r * s * dt + (m.sigma_s)(y) * s * dw,
        y + (m.b_y)(y) * dt + (m.sigma_y)(y) * db,
    )
}

/// Simulates `(S_T, Y_T)` with `n_steps` Euler steps of the original SDE.
/// Also reports whether `S` went negative on the way.
pub fn euler_terminal<R: Rng + ?Sized>(
    m: &Model,
    s0: f64,
    y0: f64,
    maturity: f64,
    n_steps: usize,
    rng: &mut R,
) -> (f64, f64, bool) {
    let dt = maturity / n_steps as f64;
    let (mut s, mut y) = (s0, y0);
    let mut negative = false;
    for _ in 0..n_steps {
        let g1: f64 = rng.sample(StandardNormal);
        let g2: f64 = rng.sample(StandardNormal);
        (s, y) = euler_step(m, s, y, dt, g1, g2);
        negative |= s < 0.0;
    }
    (s, y, negative)
}

/// Runs `per_path(path_index) -> (value, negative)` over all paths.
fn euler_map(
    cfg: &EulerConfig,
    per_path: impl Fn(u64) -> (f64, bool) + Sync,
) -> Result<(Partial, u64, f64)> {
    cfg.validate()?;
    let t0 = Instant::now();
    let n_chunks = cfg.n_paths.div_ceil(CHUNK_SIZE);
    let chunks: Vec<(Partial, u64)> = with_threads(cfg.threads, || {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut p = Partial::default();
                let mut neg = 0;
                let start = c * CHUNK_SIZE;
                for i in start..(start + CHUNK_SIZE).min(cfg.n_paths) {
                    let (v, n) = per_path(i);
                    p.push(v);
                    neg += n as u64;
                }
                (p, neg)
            })
            .collect()
    })?;
    let (mut tot, mut neg) = (Partial::default(), 0);
    for (p, n) in chunks {
        tot = tot.merge(&p);
        neg += n;
    }
    Ok((tot, neg, t0.elapsed().as_secs_f64()))
}

fn finish(p: &Partial, scale: f64, neg: u64, elapsed: f64) -> EulerRun {
    let r = p.result();
    let se = r.std_error * scale.abs();
    let mean = r.mean * scale;
    EulerRun {
        estimate: EstimateResult {
            mean,
            std_error: se,
            ci95: (mean - 1.96 * se, mean + 1.96 * se),
            n_paths: r.n_paths,
            n_jumps_mean: 0.0,
            elapsed,
        },
        negative_paths: neg,
    }
}

fn discount(p: &EulerProblem) -> f64 {
    if p.discount {
        (-p.model.r * p.maturity).exp()
    } else {
        1.0
    }
}

/// Plain Euler Monte Carlo price.
pub fn euler_price(p: &EulerProblem, cfg: &EulerConfig) -> Result<EulerRun> {
    let (tot, neg, el) = euler_map(cfg, |i| {
        let mut rng = path_stream(cfg.seed, i);
        let (s, _, n) = euler_terminal(&p.model, p.s0, p.y0, p.maturity, cfg.n_steps, &mut rng);
        (p.payoff.of_spot(s), n)
    })?;
    Ok(finish(&tot, discount(p), neg, el))
}

/// Initial-condition bumped by a finite difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bump {
    /// Spot `s0`.
    Delta,
    /// Volatility factor `y0`.
    Vega,
}

/// How the two runs of a finite difference share randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdNoise {
    /// Both runs reuse the same stream for each path.
    Common,
    /// The bumped run uses an independent seed.
    Independent,
}

/// Forward difference `(E(x + eps) - E(x)) / eps` of the Euler price.
pub fn fd_greek(
    which: Bump,
    eps: f64,
    p: &EulerProblem,
    cfg: &EulerConfig,
    noise: FdNoise,
) -> Result<EulerRun> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(param("eps", format!("must be positive, got {eps}")));
    }
    let (s_up, y_up) = match which {
        Bump::Delta => (p.s0 + eps, p.y0),
        Bump::Vega => (p.s0, p.y0 + eps),
    };
    let bumped_seed = match noise {
        FdNoise::Common => cfg.seed,
        FdNoise::Independent => cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
    };
    let run = |s0: f64, y0: f64, seed: u64, rng_idx: u64| {
        let mut rng = path_stream(seed, rng_idx);
        let (s, _, n) = euler_terminal(&p.model, s0, y0, p.maturity, cfg.n_steps, &mut rng);
        (p.payoff.of_spot(s), n)
    };
    let scale = discount(p) / eps;
    match noise {
        FdNoise::Common => {
            let (tot, neg, el) = euler_map(cfg, |i| {
                let (hi, n1) = run(s_up, y_up, cfg.seed, i);
                let (lo, n0) = run(p.s0, p.y0, cfg.seed, i);
                (hi - lo, n1 || n0)
            })?;
            Ok(finish(&tot, scale, neg, el))
        }
        FdNoise::Independent => {
            let (hi, n1, e1) = euler_map(cfg, |i| run(s_up, y_up, bumped_seed, i))?;
            let (lo, n0, e0) = euler_map(cfg, |i| run(p.s0, p.y0, cfg.seed, i))?;
            let (a, b) = (hi.result(), lo.result());
            let mean = (a.mean - b.mean) * scale;
            let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt() * scale.abs();
            Ok(EulerRun {
                estimate: EstimateResult {
                    mean,
                    std_error: se,
                    ci95: (mean - 1.96 * se, mean + 1.96 * se),
                    n_paths: cfg.n_paths,
                    n_jumps_mean: 0.0,
                    elapsed: e0 + e1,
                },
                negative_paths: n0 + n1,
            })
        }
    }
}
