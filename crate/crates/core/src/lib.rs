//! Unbiased Monte Carlo estimation of option prices, Delta and Vega for
//! two-dimensional stochastic volatility models.
//!
//! The spot follows `dS = r S dt + sigma_S(Y) S dW` and the volatility factor
//! `dY = b_Y(Y) dt + sigma_Y(Y) dB` with `d<W, B> = rho dt`. The engine works
//! in log-spot `X = ln S`, simulates a Gaussian Markov chain on the random
//! time grid of a renewal process and multiplies the payoff by explicit
//! Malliavin weights, so the estimators carry no discretization bias.
//!
//! Module map:
//! - [`model`]: coefficient functions and the built-in models.
//! - [`flow`]: the volatility ODE flow and the frozen coefficients of a step.
//! - [`renewal`]: jump-time laws and random time grids.
//! - [`chain`]: the Markov chain and its Gaussian transition density.
//! - [`weights`]: the per-step weights and the price/Delta/Vega products.
//! - [`estimators`]: the parallel Monte Carlo driver.
//! - [`baselines`]: Euler–Maruyama, finite differences and Black–Scholes.

pub mod baselines;
pub mod chain;
pub mod error;
pub mod estimators;
pub mod flow;
pub mod model;
pub mod renewal;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
