//! The Gaussian Markov chain on a random time grid.
//!
//! Over a step of length `delta` started at `(x, y)`:
//!
//! ```text
//! X' = x + r delta - a_S/2 + sigma_S Z1
//! Y' = m + sigma_Y (rho Z1 + sqrt(1 - rho^2) Z2)
//! ```
//!
//! with the frozen coefficients of [`crate::flow`] evaluated at `(y, delta)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{param, Error, Result};
use crate::flow::{frozen_coeffs, FrozenCoeffs};
use crate::model::Model;
use crate::renewal::TimeGrid;

/// Smallest admissible `1 - rho_i^2`.
pub const MIN_ONE_MINUS_RHO2: f64 = 1e-14;

/// One step of a simulated path, from state `k - 1` to state `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based step number `k`.
    pub index: usize,
    pub x_prev: f64,
    pub y_prev: f64,
    pub x_next: f64,
    pub y_next: f64,
    pub z1: f64,
    pub z2: f64,
    /// Frozen coefficients at `(y_prev, delta)`.
    pub fc: FrozenCoeffs,
}

impl StepRecord {
    pub fn delta(&self) -> f64 {
        self.fc.delta
    }

    /// Recovers `Z1` from the states.
    pub fn implied_z1(&self, r: f64) -> f64 {
        (self.x_next - self.x_prev - (r * self.fc.delta - 0.5 * self.fc.a_s_i)) / self.fc.sigma_s_i
    }
}

/// A simulated path: `N_T + 1` chained steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPath {
    pub grid: TimeGrid,
    pub steps: Vec<StepRecord>,
}

impl ChainPath {
    /// `(X, Y)` at the horizon.
    pub fn terminal(&self) -> (f64, f64) {
        let last = self.steps.last().expect("a path has at least one step");
        (last.x_next, last.y_next)
    }
}

/// Advances the chain by one step with the given normals.
pub fn chain_step(
    model: &Model,
    index: usize,
    x_prev: f64,
    y_prev: f64,
    delta: f64,
    z1: f64,
    z2: f64,
) -> Result<StepRecord> {
    let fc = frozen_coeffs(model, y_prev, delta)?;
    let q = one_minus_rho2(&fc)?;
    let x_next = x_prev + (model.r * delta - 0.5 * fc.a_s_i) + fc.sigma_s_i * z1;
    let y_next = fc.m_i + fc.sigma_y_i * (fc.rho_i * z1 + q.sqrt() * z2);
    Ok(StepRecord {
        index,
        x_prev,
        y_prev,
        x_next,
        y_next,
        z1,
        z2,
        fc,
    })
}

/// `1 - rho_i^2`, rejecting near-singular covariances.
pub fn one_minus_rho2(fc: &FrozenCoeffs) -> Result<f64> {
    let q = 1.0 - fc.rho_i * fc.rho_i;
    if q > MIN_ONE_MINUS_RHO2 {
        Ok(q)
    } else {
        Err(Error::DegenerateCovariance { one_minus_rho2: q })
    }
}

/// Simulates the chain with explicit normals, one `(z1, z2)` pair per step.
pub fn simulate_chain_with_normals(
    model: &Model,
    x0: f64,
    y0: f64,
    grid: TimeGrid,
    normals: &[(f64, f64)],
) -> Result<ChainPath> {
    let n_steps = grid.n_jumps() + 1;
    if normals.len() != n_steps {
        return Err(param(
            "normals",
            format!("need {n_steps} pairs, got {}", normals.len()),
        ));
    }
    let mut steps = Vec::with_capacity(n_steps);
    let (mut x, mut y) = (x0, y0);
    for (k, (delta, &(z1, z2))) in grid.deltas().zip(normals).enumerate() {
        let st = chain_step(model, k + 1, x, y, delta, z1, z2)?;
        (x, y) = (st.x_next, st.y_next);
        steps.push(st);
    }
    Ok(ChainPath { grid, steps })
}

/// Simulates the chain along `grid`, drawing two standard normals per step.
pub fn simulate_chain<R: Rng + ?Sized>(
    model: &Model,
    x0: f64,
    y0: f64,
    grid: TimeGrid,
    rng: &mut R,
) -> Result<ChainPath> {
    let mut steps = Vec::with_capacity(grid.n_jumps() + 1);
    let (mut x, mut y) = (x0, y0);
    for (k, delta) in grid.deltas().enumerate() {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let st = chain_step(model, k + 1, x, y, delta, z1, z2)?;
        (x, y) = (st.x_next, st.y_next);
        steps.push(st);
    }
    Ok(ChainPath { grid, steps })
}

/// Gaussian transition density of one step from `(x0, y0)` to `(x, y)`,
/// where `fc` holds the frozen coefficients at `(y0, fc.delta)`.
pub fn proxy_density(fc: &FrozenCoeffs, r: f64, x0: f64, y0: f64, x: f64, y: f64) -> Result<f64> {
    let _ = y0; // enters only through fc
    let q = one_minus_rho2(fc)?;
    let u = (x - (x0 + r * fc.delta - 0.5 * fc.a_s_i)) / fc.sigma_s_i;
    let v = (y - fc.m_i) / fc.sigma_y_i;
    let quad = (u * u - 2.0 * fc.rho_i * u * v + v * v) / q;
    Ok((-0.5 * quad).exp() / (2.0 * PI * fc.sigma_s_i * fc.sigma_y_i * q.sqrt()))
}
