//! The deterministic volatility flow and frozen coefficients.
//!
//! `m_t(y)` solves `m' = b_Y(m)` with `m_0 = y`. Over a step of length
//! `delta` started at `y`, the chain uses the integrals of the coefficients
//! along this flow (the "frozen coefficients") together with their
//! derivatives in `y`.

use crate::error::{finite, Error, Result};
use crate::model::{Model, SpotVol};

/// Composite Simpson 3/8 rule on `[0, t]` with `panels` panels.
pub fn simpson38(g: impl Fn(f64) -> f64, t: f64, panels: usize) -> Result<f64> {
    if panels == 0 {
        return Err(crate::error::param("panels", "must be at least 1"));
    }
    let h = t / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let s0 = p as f64 * h;
        let vals = [g(s0), g(s0 + h / 3.0), g(s0 + 2.0 * h / 3.0), g(s0 + h)];
        if let Some(bad) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::Quadrature {
                at: s0 + bad as f64 * h / 3.0,
            });
        }
        acc += vals[0] + 3.0 * vals[1] + 3.0 * vals[2] + vals[3];
    }
    Ok(acc * h / 8.0)
}

/// One RK4 step for the flow and its tangent `J' = b_Y'(m) J`.
#[inline]
fn rk4_step(model: &Model, m: f64, j: f64, h: f64) -> (f64, f64) {
    let b = &model.b_y;
    let b1 = &model.b1_y;
    let k1 = b(m);
    let l1 = b1(m) * j;
    let m2 = m + 0.5 * h * k1;
    let k2 = b(m2);
    let l2 = b1(m2) * (j + 0.5 * h * l1);
    let m3 = m + 0.5 * h * k2;
    let k3 = b(m3);
    let l3 = b1(m3) * (j + 0.5 * h * l2);
    let m4 = m + h * k3;
    let k4 = b(m4);
    let l4 = b1(m4) * (j + h * l3);
    (
        m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
        j + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4),
    )
}

/// Integrates flow and tangent over `[0, t]` in `n` equal RK4 steps.
fn rk4(model: &Model, y: f64, t: f64, n: usize) -> (f64, f64) {
    let h = t / n as f64;
    let (mut m, mut j) = (y, 1.0);
    for _ in 0..n {
        (m, j) = rk4_step(model, m, j, h);
    }
    (m, j)
}

fn flow_and_tangent(model: &Model, y: f64, delta: f64) -> Result<(f64, f64)> {
    if delta.is_nan() || delta < 0.0 {
        return Err(crate::error::param(
            "delta",
            format!("must be >= 0, got {delta}"),
        ));
    }
    if delta == 0.0 {
        return Ok((y, 1.0));
    }
    let (m, j) = match model.ou_drift() {
        Some((lambda, mu)) => {
            let e = (-lambda * delta).exp();
            (mu + (y - mu) * e, e)
        }
        None => rk4(model, y, delta, model.quadrature.rk4_divisor),
    };
    Ok((finite(m, "flow")?, finite(j, "flow tangent")?))
}

/// `m_delta(y)`.
pub fn flow(model: &Model, y: f64, delta: f64) -> Result<f64> {
    flow_and_tangent(model, y, delta).map(|(m, _)| m)
}

/// `d m_delta(y) / dy`.
pub fn flow_tangent(model: &Model, y: f64, delta: f64) -> Result<f64> {
    flow_and_tangent(model, y, delta).map(|(_, j)| j)
}

/// Frozen coefficients of one chain step of length `delta` started at `y`.
///
/// Fields with a `1` are derivatives with respect to `y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrozenCoeffs {
    pub delta: f64,
    pub a_s_i: f64,
    pub a_y_i: f64,
    pub sigma_s_i: f64,
    pub sigma_y_i: f64,
    pub sigma_sy_i: f64,
    pub rho_i: f64,
    pub m_i: f64,
    pub a1_s_i: f64,
    pub sigma1_s_i: f64,
    pub a1_y_i: f64,
    pub sigma1_y_i: f64,
    pub sigma1_sy_i: f64,
    pub rho1_i: f64,
    pub m1_i: f64,
}

/// Raw integrals before the square roots and the correlation quotient.
struct Integrals {
    a_s: f64,
    a_y: f64,
    s_sy: f64,
    a1_s: f64,
    a1_y: f64,
    s1_sy: f64,
    m: f64,
    m1: f64,
}

fn assemble(model: &Model, delta: f64, it: Integrals, exact_rho: bool) -> Result<FrozenCoeffs> {
    if !(it.a_s > 0.0 && it.a_y > 0.0) {
        return Err(Error::NonFinite {
            context: "frozen variance (non-positive integral)",
        });
    }
    let sigma_s_i = it.a_s.sqrt();
    let sigma_y_i = it.a_y.sqrt();
    let sigma1_s_i = it.a1_s / (2.0 * sigma_s_i);
    let sigma1_y_i = it.a1_y / (2.0 * sigma_y_i);
    let prod = sigma_s_i * sigma_y_i;
    let (rho_i, rho1_i) = if exact_rho {
        (model.rho, 0.0)
    } else {
        let rho_i = model.rho * it.s_sy / prod;
        let dprod = sigma1_s_i * sigma_y_i + sigma_s_i * sigma1_y_i;
        let rho1_i = model.rho * (it.s1_sy * prod - it.s_sy * dprod) / (prod * prod);
        (rho_i, rho1_i)
    };
    let fc = FrozenCoeffs {
        delta,
        a_s_i: it.a_s,
        a_y_i: it.a_y,
        sigma_s_i,
        sigma_y_i,
        sigma_sy_i: it.s_sy,
        rho_i,
        m_i: it.m,
        a1_s_i: it.a1_s,
        sigma1_s_i,
        a1_y_i: it.a1_y,
        sigma1_y_i,
        sigma1_sy_i: it.s1_sy,
        rho1_i,
        m1_i: it.m1,
    };
    for v in [
        fc.sigma_s_i,
        fc.sigma_y_i,
        fc.sigma_sy_i,
        fc.rho_i,
        fc.a1_s_i,
        fc.a1_y_i,
        fc.sigma1_sy_i,
        fc.rho1_i,
        fc.m_i,
        fc.m1_i,
    ] {
        finite(v, "frozen coefficients")?;
    }
    Ok(fc)
}

/// Frozen coefficients, using closed forms where the model has them and
/// composite Simpson 3/8 quadrature otherwise.
pub fn frozen_coeffs(model: &Model, y: f64, delta: f64) -> Result<FrozenCoeffs> {
    check_delta(delta)?;
    let Some(kind) = model.builtin_kind() else {
        return frozen_coeffs_quadrature(model, y, delta);
    };
    let (lambda, mu, sy) = (kind.lambda_y, kind.mu, kind.sigma_y);
    let e1 = (-lambda * delta).exp();
    let (m, m1) = (mu + (y - mu) * e1, e1);
    let a_y = sy * sy * delta;
    match kind.spot {
        SpotVol::BlackScholes { sigma } => {
            let it = Integrals {
                a_s: sigma * sigma * delta,
                a_y,
                s_sy: sigma * sy * delta,
                a1_s: 0.0,
                a1_y: 0.0,
                s1_sy: 0.0,
                m,
                m1,
            };
            assemble(model, delta, it, true)
        }
        SpotVol::SteinStein { sigma1, sigma2 } => {
            let a = sigma1 * mu + sigma2;
            let b = sigma1 * (y - mu);
            let g1 = -(-lambda * delta).exp_m1() / lambda;
            let g2 = -(-2.0 * lambda * delta).exp_m1() / (2.0 * lambda);
            let it = Integrals {
                a_s: a * a * delta + b * b * g2 + 2.0 * a * b * g1,
                a_y,
                s_sy: sy * (a * delta + b * g1),
                a1_s: 2.0 * sigma1 * b * g2 + 2.0 * sigma1 * a * g1,
                a1_y: 0.0,
                s1_sy: sy * sigma1 * g1,
                m,
                m1,
            };
            assemble(model, delta, it, false)
        }
        SpotVol::PeriodicCosine { .. } => frozen_coeffs_quadrature(model, y, delta),
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(crate::error::param(
            "delta",
            format!("frozen coefficients need a positive interval, got {delta}"),
        ))
    }
}

/// Frozen coefficients by composite Simpson 3/8 quadrature along the flow,
/// ignoring any closed form the model offers.
///
/// Derivatives in `y` are integrated as `g'(m_s) m'_s`, which is the exact
/// derivative of the discrete quadrature sum.
pub fn frozen_coeffs_quadrature(model: &Model, y: f64, delta: f64) -> Result<FrozenCoeffs> {
    check_delta(delta)?;
    let panels = model.quadrature.panels.max(1);
    let nodes = 3 * panels;
    let ds = delta / nodes as f64;
    let h = delta / panels as f64;
    let ou = model.ou_drift();
    // RK4 substeps between consecutive nodes so that each step is at most
    // delta / rk4_divisor.
    let sub = model.quadrature.rk4_divisor.div_ceil(nodes).max(1);

    let mut acc = [0.0f64; 6];
    let (mut m, mut j) = (y, 1.0);
    for k in 0..=nodes {
        let s = k as f64 * ds;
        if k > 0 {
            match ou {
                Some((lambda, mu)) => {
                    let e = (-lambda * s).exp();
                    m = mu + (y - mu) * e;
                    j = e;
                }
                None => {
                    for _ in 0..sub {
                        (m, j) = rk4_step(model, m, j, ds / sub as f64);
                    }
                }
            }
        }
        let w = if k == 0 || k == nodes {
            1.0
        } else if k % 3 == 0 {
            2.0
        } else {
            3.0
        };
        let ss = (model.sigma_s)(m);
        let ss1 = (model.sigma1_s)(m);
        let sy = (model.sigma_y)(m);
        let sy1 = (model.sigma1_y)(m);
        let vals = [
            ss * ss,
            sy * sy,
            ss * sy,
            2.0 * ss * ss1 * j,
            2.0 * sy * sy1 * j,
            (ss1 * sy + ss * sy1) * j,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature { at: s });
        }
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += w * v;
        }
    }
    let scale = h / 8.0;
    let it = Integrals {
        a_s: acc[0] * scale,
        a_y: acc[1] * scale,
        s_sy: acc[2] * scale,
        a1_s: acc[3] * scale,
        a1_y: acc[4] * scale,
        s1_sy: acc[5] * scale,
        m: finite(m, "flow")?,
        m1: finite(j, "flow tangent")?,
    };
    assemble(model, delta, it, false)
}
