//! Jump-time laws and the random time grid of a renewal process.
//!
//! Inter-arrival gaps are i.i.d. with density `f`. The grid keeps the jumps
//! in `[0, T)` and appends `T`, so a path with `N_T` jumps has `N_T + 1`
//! steps.

use rand::Rng;

use crate::error::{param, Error, Result};

/// Law of the inter-arrival gaps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpSampler {
    /// `f(t) = lambda * exp(-lambda t)` on `[0, inf)` (Poisson process).
    Exponential { lambda: f64 },
    /// `f(t) = (1 - alpha) / tau_bar^(1 - alpha) * t^(-alpha)` on
    /// `(0, tau_bar]`, i.e. `F(t) = (t / tau_bar)^(1 - alpha)`.
    BetaOneMinusAlpha { alpha: f64, tau_bar: f64 },
}

impl JumpSampler {
    pub fn exponential(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(param("lambda", format!("must be positive, got {lambda}")));
        }
        Ok(Self::Exponential { lambda })
    }

    pub fn beta(alpha: f64, tau_bar: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(param("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        if !(tau_bar.is_finite() && tau_bar > 0.0) {
            return Err(param("tau_bar", format!("must be positive, got {tau_bar}")));
        }
        Ok(Self::BetaOneMinusAlpha { alpha, tau_bar })
    }

    /// Gap density `f(t)`.
    pub fn density(&self, t: f64) -> Result<f64> {
        match *self {
            Self::Exponential { lambda } => {
                if t < 0.0 || t.is_nan() {
                    return Err(Error::Domain {
                        what: "t",
                        value: t,
                    });
                }
                Ok(lambda * (-lambda * t).exp())
            }
            Self::BetaOneMinusAlpha { alpha, tau_bar } => {
                if !(t >= 0.0 && t <= tau_bar) {
                    return Err(Error::Domain {
                        what: "t",
                        value: t,
                    });
                }
                Ok((1.0 - alpha) / tau_bar.powf(1.0 - alpha) * t.powf(-alpha))
            }
        }
    }

    /// `F(t)`, clamped to `[0, 1]` outside the support.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Exponential { lambda } => -(-lambda * t).exp_m1(),
            Self::BetaOneMinusAlpha { alpha, tau_bar } => {
                if t >= tau_bar {
                    1.0
                } else {
                    (t / tau_bar).powf(1.0 - alpha)
                }
            }
        }
    }

    /// `1 - F(t)`.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            Self::Exponential { lambda } => (-lambda * t.max(0.0)).exp(),
            Self::BetaOneMinusAlpha { .. } => 1.0 - self.cdf(t),
        }
    }

    /// Inverse CDF for `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Exponential { lambda } => -(-u).ln_1p() / lambda,
            Self::BetaOneMinusAlpha { alpha, tau_bar } => tau_bar * u.powf(1.0 / (1.0 - alpha)),
        }
    }
}

/// Random time grid `0 = zeta_0 < zeta_1 < ... < zeta_{N_T} < zeta_{N_T+1} = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    zeta: Vec<f64>,
}

impl TimeGrid {
    /// Grid from explicit jump times in `(0, T)`.
    pub fn from_jumps(jumps: &[f64], horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(param("T", format!("must be positive, got {horizon}")));
        }
        let mut zeta = Vec::with_capacity(jumps.len() + 2);
        zeta.push(0.0);
        zeta.extend_from_slice(jumps);
        zeta.push(horizon);
        if zeta
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(param(
                "jumps",
                "jump times must be strictly increasing in (0, T)",
            ));
        }
        Ok(Self { zeta })
    }

    /// All grid points including `0` and `T`.
    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    /// Number of jumps `N_T` before the horizon.
    pub fn n_jumps(&self) -> usize {
        self.zeta.len() - 2
    }

    pub fn horizon(&self) -> f64 {
        self.zeta[self.zeta.len() - 1]
    }

    /// Last jump time `zeta_{N_T}` (zero when there is no jump).
    pub fn last_jump(&self) -> f64 {
        self.zeta[self.zeta.len() - 2]
    }

    /// `T - zeta_{N_T}`.
    pub fn last_gap(&self) -> f64 {
        self.horizon() - self.last_jump()
    }

    /// Step lengths `zeta_k - zeta_{k-1}`, `k = 1..=N_T+1`.
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.zeta.windows(2).map(|w| w[1] - w[0])
    }
}

/// Samples a grid on `[0, horizon]` by inverse-CDF gaps. Zero gaps, and gaps
/// too small to move the current time in floating point, are redrawn.
pub fn sample_grid<R: Rng + ?Sized>(s: &JumpSampler, horizon: f64, rng: &mut R) -> TimeGrid {
    assert!(horizon > 0.0, "horizon must be positive");
    let mut zeta = vec![0.0];
    let mut t = 0.0;
    loop {
        let gap = s.quantile(rng.random::<f64>());
        let next = t + gap;
        if gap.is_nan() || gap <= 0.0 || next == t {
            continue;
        }
        if next >= horizon {
            break;
        }
        zeta.push(next);
        t = next;
    }
    zeta.push(horizon);
    TimeGrid { zeta }
}
