//! Malliavin weights of the unbiased representation and of the Delta/Vega
//! integration-by-parts formulas.
//!
//! # Index convention
//!
//! Step `k` (1-based, `k = 1..=N_T+1`) moves the chain from state `k - 1` to
//! state `k` over `[zeta_{k-1}, zeta_k]`. Its [`StepRecord`] carries the
//! frozen coefficients at `(Y_{k-1}, delta_k)`, the normals `Z1, Z2` and
//! both states. Everything computed for step `k` uses only that record:
//!
//! - `D1`, `D2` differentiate in the new state `(X_k, Y_k)` with the old state
//!   held fixed.
//! - `Dp` differentiates in the old volatility `Y_{k-1}` with the normals held
//!   fixed, so `X_k` and `Y_k` move along the step map.
//! - `I1(H) = H I1(1) - D1 H` and `I2(H) = H I2(1) - D2 H`.
//!
//! Steps `k <= N_T` carry the full weight `theta_k`; the final step carries
//! the survival weight `1 / (1 - F(T - zeta_{N_T}))`. When `N_T = 0` the only
//! step is the final one.
//!
//! The assembled closed forms assume a constant vol-of-vol, so that the
//! `c_Y` terms vanish identically; models without one are rejected.

use crate::chain::{one_minus_rho2, ChainPath, StepRecord};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::renewal::JumpSampler;

/// Products switch to sign/log-magnitude accumulation above this many jumps.
pub const LOG_PRODUCT_THRESHOLD: usize = 8;

/// Model and jump law shared by all weight computations of a run.
#[derive(Clone, Copy, Debug)]
pub struct WeightContext<'a> {
    pub model: &'a Model,
    pub sampler: &'a JumpSampler,
}

impl<'a> WeightContext<'a> {
    pub fn new(model: &'a Model, sampler: &'a JumpSampler) -> Result<Self> {
        if model.constant_sigma_y().is_none() {
            return Err(Error::UnsupportedModel(
                "the weight formulas require a constant vol-of-vol".into(),
            ));
        }
        Ok(Self { model, sampler })
    }
}

/// `I1(1)`, `I2(1)` and their (constant) state derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseOperators {
    pub i1_1: f64,
    pub i2_1: f64,
    pub d1_i1_1: f64,
    pub d2_i1_1: f64,
    pub d1_i2_1: f64,
    pub d2_i2_1: f64,
}

pub fn base_operators(step: &StepRecord) -> Result<BaseOperators> {
    Geometry::new(step).map(|g| g.base)
}

/// Quantities of one step shared by interior and final weights.
struct Geometry {
    base: BaseOperators,
    /// `rho Z1 + sqrt(1 - rho^2) Z2`, the normalized increment of `Y`.
    w: f64,
    /// `sqrt(1 - rho^2) Z1 - rho Z2`.
    v: f64,
    sq: f64,
    q: f64,
    /// Flow derivatives `Dp Y_k`, `Dp X_k` and their state derivatives.
    yp: f64,
    xp: f64,
    dx_yp: f64,
    dy_yp: f64,
    dx_xp: f64,
    /// `Dp I1(1)`, `Dp I2(1)`.
    dp_i1: f64,
    dp_i2: f64,
}

impl Geometry {
    fn new(st: &StepRecord) -> Result<Self> {
        let fc = &st.fc;
        let q = one_minus_rho2(fc)?;
        let sq = q.sqrt();
        let (rho, ss, sy) = (fc.rho_i, fc.sigma_s_i, fc.sigma_y_i);
        let (z1, z2) = (st.z1, st.z2);
        let w = rho * z1 + sq * z2;
        let v = sq * z1 - rho * z2;
        let i1 = (z1 - rho * w) / (ss * q);
        let i2 = (w - rho * z1) / (sy * q);
        let cross = -rho / (ss * sy * q);
        let base = BaseOperators {
            i1_1: i1,
            i2_1: i2,
            d1_i1_1: 1.0 / (fc.a_s_i * q),
            d2_i1_1: cross,
            d1_i2_1: cross,
            d2_i2_1: 1.0 / (fc.a_y_i * q),
        };
        let (ss1, sy1, rho1) = (fc.sigma1_s_i, fc.sigma1_y_i, fc.rho1_i);
        let yp = fc.m1_i + sy1 * w + sy * rho1 / sq * v;
        let xp = -0.5 * fc.a1_s_i + ss1 * z1;
        let dx_yp = sy * rho1 / (q * ss);
        let dy_yp = sy1 / sy - rho * rho1 / q;
        let dx_xp = ss1 / ss;
        let dp_i1 = -(ss1 / ss) * i1 - (rho1 / q) * (sy / ss) * i2;
        let dp_i2 = -dy_yp * i2;
        Ok(Self {
            base,
            w,
            v,
            sq,
            q,
            yp,
            xp,
            dx_yp,
            dy_yp,
            dx_xp,
            dp_i1,
            dp_i2,
        })
    }
}

/// All weights of an interior step `k <= N_T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepWeights {
    pub i1_1: f64,
    pub i2_1: f64,
    pub d1_i1_1: f64,
    pub d2_i1_1: f64,
    pub d1_i2_1: f64,
    pub d2_i2_1: f64,
    pub c_s: f64,
    pub c_y: f64,
    pub b_y_w: f64,
    pub c_ys: f64,
    pub theta: f64,
    pub d1_theta: f64,
    pub d2_theta: f64,
    /// `Dp theta`, the derivative in the previous volatility state.
    pub d2prev_theta: f64,
    pub theta_ey: f64,
    pub theta_ex: f64,
    pub theta_c: f64,
    pub i1_theta: f64,
    pub i2_theta_ey: f64,
    pub i1_theta_ex: f64,
}

/// Weights of the final step `N_T + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerminalWeights {
    pub theta_last: f64,
    pub theta_ey_last: f64,
    pub theta_ex_last: f64,
    pub i1_theta_last: f64,
    pub i2_theta_ey_last: f64,
    pub i1_theta_ex_last: f64,
}

/// A coefficient difference `g(Y_k) - g(m)` with what the weights need of it.
struct Diff {
    val: f64,
    /// `D2`, `D2 D2` of the difference (functions of `Y_k` only).
    d2: f64,
    d22: f64,
    /// `Dp` of the difference and its state derivatives.
    dp: f64,
    d1_dp: f64,
    d2_dp: f64,
    d21_dp: f64,
}

impl Diff {
    /// `g_y = (g, g', g'')` at `Y_k`; `g_m = (g, g')` at `m`.
    fn new(g_y: [f64; 3], g_m: [f64; 2], m1: f64, geo: &Geometry) -> Self {
        let dp = g_y[1] * geo.yp - g_m[1] * m1;
        Self {
            val: g_y[0] - g_m[0],
            d2: g_y[1],
            d22: g_y[2],
            dp,
            d1_dp: g_y[1] * geo.dx_yp,
            d2_dp: g_y[2] * geo.yp + g_y[1] * geo.dy_yp,
            d21_dp: g_y[2] * geo.dx_yp,
        }
    }
}

/// Weights of interior step `st`.
pub fn step_weights(ctx: &WeightContext<'_>, st: &StepRecord) -> Result<StepWeights> {
    let model = ctx.model;
    let fc = &st.fc;
    let geo = Geometry::new(st)?;
    let BaseOperators {
        i1_1: i1,
        i2_1: i2,
        d1_i1_1: d1i1,
        d2_i1_1: d2i1,
        d1_i2_1: d1i2,
        d2_i2_1: d2i2,
    } = geo.base;
    let f = ctx.sampler.density(fc.delta)?;
    let (y, m, m1) = (st.y_next, fc.m_i, fc.m1_i);
    let sy_const = model.constant_sigma_y().ok_or_else(|| {
        Error::UnsupportedModel("the weight formulas require a constant vol-of-vol".into())
    })?;

    let (s_y, s1_y, s2_y) = ((model.sigma_s)(y), (model.sigma1_s)(y), (model.sigma2_s)(y));
    let (s_m, s1_m) = ((model.sigma_s)(m), (model.sigma1_s)(m));
    // c_S = (a_S(Y_k) - a_S(m)) / 2 with a_S = sigma_S^2.
    let cs = Diff::new(
        [0.5 * s_y * s_y, s_y * s1_y, s1_y * s1_y + s_y * s2_y],
        [0.5 * s_m * s_m, s_m * s1_m],
        m1,
        &geo,
    );
    // c_YS = rho (sigma_S sigma_Y)(Y_k) - rho (sigma_S sigma_Y)(m).
    let k = model.rho * sy_const;
    let cys = Diff::new([k * s_y, k * s1_y, k * s2_y], [k * s_m, k * s1_m], m1, &geo);
    // b = b_Y(Y_k) - b_Y(m).
    let bb = Diff::new(
        [(model.b_y)(y), (model.b1_y)(y), (model.b2_y)(y)],
        [(model.b_y)(m), (model.b1_y)(m)],
        m1,
        &geo,
    );

    let d1_t11 = 2.0 * cs.val * i1 * d1i1;
    let d1_t1 = cs.val * d1i1;
    let d1_t2 = bb.val * d1i2;
    let d1_t12 = cys.val * (d1i1 * i2 + d1i2 * i1) - d1i1 * cys.d2;

    let d2_t11 = cs.d2 * (i1 * i1 - d1i1) + 2.0 * cs.val * i1 * d2i1;
    let d2_t1 = cs.d2 * i1 + cs.val * d2i1;
    let d2_t2 = bb.d2 * i2 + bb.val * d2i2 - bb.d22;
    let d2_t12 =
        cys.d2 * i1 * i2 + cys.val * (d2i2 * i1 + d2i1 * i2) - i1 * cys.d22 - 2.0 * cys.d2 * d2i1;

    // Dp of the constant operator derivatives D1 I1(1) and D2 I1(1).
    let (ss, sy, rho) = (fc.sigma_s_i, fc.sigma_y_i, fc.rho_i);
    let (ss1, sy1, rho1) = (fc.sigma1_s_i, fc.sigma1_y_i, fc.rho1_i);
    let q = geo.q;
    let q1 = -2.0 * rho * rho1;
    let aq = fc.a_s_i * q;
    let dp_d1i1 = -(fc.a1_s_i * q + fc.a_s_i * q1) / (aq * aq);
    let ssq = ss * sy * q;
    let dp_d2i1 = -(rho1 * ssq - rho * (ss1 * sy * q + ss * sy1 * q + ss * sy * q1)) / (ssq * ssq);
    let (dpi1, dpi2) = (geo.dp_i1, geo.dp_i2);

    let dp_t11 = cs.dp * (i1 * i1 - d1i1) + cs.val * (2.0 * i1 * dpi1 - dp_d1i1);
    let dp_t1 = cs.dp * i1 + cs.val * dpi1;
    let dp_t2 = bb.dp * i2 + bb.val * dpi2 - bb.d22 * geo.yp;
    let dp_t12 = cys.dp * i1 * i2 + cys.val * (dpi1 * i2 + i1 * dpi2)
        - dpi1 * cys.d2
        - i1 * cys.d22 * geo.yp
        - cys.dp * d2i1
        - cys.val * dp_d2i1;

    let inv_f = 1.0 / f;
    let theta = theta_times_f(&geo.base, cs.val, bb.val, bb.d2, cys.val, cys.d2) * inv_f;
    let d1_theta = (d1_t11 - d1_t1 + d1_t2 + d1_t12) * inv_f;
    let d2_theta = (d2_t11 - d2_t1 + d2_t2 + d2_t12) * inv_f;
    let dp_theta = (dp_t11 - dp_t1 + dp_t2 + dp_t12) * inv_f;
    let i1_theta = theta * i1 - d1_theta;

    let theta_ey = m1 * theta + (i1 * cys.dp - cys.d1_dp) * inv_f;
    let theta_ex = (i1 * cs.dp - cs.d1_dp) * inv_f;
    let d2_theta_ey = m1 * d2_theta + (d2i1 * cys.dp + i1 * cys.d2_dp - cys.d21_dp) * inv_f;
    let i2_theta_ey = theta_ey * i2 - d2_theta_ey;
    // D1 D1 Dp c_S vanishes: Dp c_S is affine in X_k.
    let d1_theta_ex = (d1i1 * cs.dp + i1 * cs.d1_dp) * inv_f;
    let i1_theta_ex = theta_ex * i1 - d1_theta_ex;

    // I2(m' theta - theta_eY) = -I12(Dp c_YS) / f.
    let comp =
        -(cys.dp * i1 * i2 - i1 * cys.d2_dp - cys.dp * d1i2 - cys.d1_dp * i2 + cys.d21_dp) * inv_f;
    let i2_theta = theta * i2 - d2_theta;
    let w_term = sy1 * (geo.w * i2_theta - theta / sy);
    let v_term = sy * rho1 / geo.sq * (geo.v * i2_theta + rho * theta / (sy * geo.sq));
    let x_term = i1_theta * geo.xp - theta * geo.dx_xp;
    let theta_c = comp + w_term + v_term + x_term - i1_theta_ex + dp_theta;

    Ok(StepWeights {
        i1_1: i1,
        i2_1: i2,
        d1_i1_1: d1i1,
        d2_i1_1: d2i1,
        d1_i2_1: d1i2,
        d2_i2_1: d2i2,
        c_s: cs.val,
        c_y: 0.0,
        b_y_w: bb.val,
        c_ys: cys.val,
        theta,
        d1_theta,
        d2_theta,
        d2prev_theta: dp_theta,
        theta_ey,
        theta_ex,
        theta_c,
        i1_theta,
        i2_theta_ey,
        i1_theta_ex,
    })
}

/// `theta * f` as `I11(c_S) - I1(c_S) + I2(b) + I12(c_YS)`, from the values of
/// `c_S`, `b` and `c_YS` and the derivatives `b_Y'` and `c_YS'` at `Y_k`.
fn theta_times_f(b: &BaseOperators, cs: f64, bb: f64, b1: f64, cys: f64, cys1: f64) -> f64 {
    let (i1, i2) = (b.i1_1, b.i2_1);
    let t11 = cs * (i1 * i1 - b.d1_i1_1);
    let t1 = cs * i1;
    let t2 = bb * i2 - b1;
    let t12 = cys * i1 * i2 - i1 * cys1 - cys * b.d2_i1_1;
    t11 - t1 + t2 + t12
}

/// Weights of the final step, whose `delta` is `T - zeta_{N_T}`.
pub fn terminal_weights(ctx: &WeightContext<'_>, st: &StepRecord) -> Result<TerminalWeights> {
    let geo = Geometry::new(st)?;
    let surv = ctx.sampler.survival(st.fc.delta);
    if surv.is_nan() || surv <= 0.0 {
        return Err(Error::Domain {
            what: "final gap (zero survival)",
            value: st.fc.delta,
        });
    }
    let theta = 1.0 / surv;
    let theta_ey = theta * geo.yp;
    let theta_ex = theta * geo.xp;
    Ok(TerminalWeights {
        theta_last: theta,
        theta_ey_last: theta_ey,
        theta_ex_last: theta_ex,
        i1_theta_last: theta * geo.base.i1_1,
        i2_theta_ey_last: theta_ey * geo.base.i2_1 - theta * geo.dy_yp,
        i1_theta_ex_last: theta_ex * geo.base.i1_1 - theta * geo.dx_xp,
    })
}

/// The per-step factors entering the product formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepFactors {
    pub delta: f64,
    pub theta: f64,
    pub theta_ey: f64,
    pub theta_ex: f64,
    pub theta_c: f64,
    pub i1_theta: f64,
    pub i2_theta_ey: f64,
    pub i1_theta_ex: f64,
}

impl From<(&StepWeights, f64)> for StepFactors {
    fn from((w, delta): (&StepWeights, f64)) -> Self {
        Self {
            delta,
            theta: w.theta,
            theta_ey: w.theta_ey,
            theta_ex: w.theta_ex,
            theta_c: w.theta_c,
            i1_theta: w.i1_theta,
            i2_theta_ey: w.i2_theta_ey,
            i1_theta_ex: w.i1_theta_ex,
        }
    }
}

impl From<(&TerminalWeights, f64)> for StepFactors {
    fn from((w, delta): (&TerminalWeights, f64)) -> Self {
        Self {
            delta,
            theta: w.theta_last,
            theta_ey: w.theta_ey_last,
            theta_ex: w.theta_ex_last,
            theta_c: 0.0,
            i1_theta: w.i1_theta_last,
            i2_theta_ey: w.i2_theta_ey_last,
            i1_theta_ex: w.i1_theta_ex_last,
        }
    }
}

/// How products of step weights are accumulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductMode {
    /// Prefix/suffix products, linear in the number of steps.
    Direct,
    /// Every product term recomputed in sign/log-magnitude form.
    LogMagnitude,
}

/// Weights of a whole path, ready for the product formulas.
#[derive(Clone, Debug, PartialEq)]
pub struct PathWeights {
    pub factors: Vec<StepFactors>,
}

/// Which parts of a path's weights to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Need {
    /// Only `theta`; enough for the price.
    Price,
    /// Every factor.
    All,
}

/// Computes the weights of every step of `path`.
pub fn path_weights(ctx: &WeightContext<'_>, path: &ChainPath, need: Need) -> Result<PathWeights> {
    let n = path.steps.len();
    let mut factors = Vec::with_capacity(n);
    for st in &path.steps[..n - 1] {
        let f = if need == Need::Price {
            price_only_factor(ctx, st)?
        } else {
            StepFactors::from((&step_weights(ctx, st)?, st.fc.delta))
        };
        factors.push(f);
    }
    let last = &path.steps[n - 1];
    factors.push(StepFactors::from((
        &terminal_weights(ctx, last)?,
        last.fc.delta,
    )));
    Ok(PathWeights { factors })
}

/// `theta` alone, skipping the derivative terms.
fn price_only_factor(ctx: &WeightContext<'_>, st: &StepRecord) -> Result<StepFactors> {
    let model = ctx.model;
    let fc = &st.fc;
    let geo = Geometry::new(st)?;
    let b = geo.base;
    let f = ctx.sampler.density(fc.delta)?;
    let (y, m) = (st.y_next, fc.m_i);
    let sy_const = model.constant_sigma_y().unwrap_or(0.0);
    let (s_y, s1_y) = ((model.sigma_s)(y), (model.sigma1_s)(y));
    let s_m = (model.sigma_s)(m);
    let cs = 0.5 * s_y * s_y - 0.5 * s_m * s_m;
    let k = model.rho * sy_const;
    let cys = k * s_y - k * s_m;
    let bb = (model.b_y)(y) - (model.b_y)(m);
    let theta = theta_times_f(&b, cs, bb, (model.b1_y)(y), cys, k * s1_y) * (1.0 / f);
    Ok(StepFactors {
        delta: fc.delta,
        theta,
        theta_ey: f64::NAN,
        theta_ex: f64::NAN,
        theta_c: f64::NAN,
        i1_theta: f64::NAN,
        i2_theta_ey: f64::NAN,
        i1_theta_ex: f64::NAN,
    })
}

fn log_product(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut sign = 1.0;
    let mut log = 0.0;
    for v in it {
        if v == 0.0 {
            return 0.0;
        }
        if v < 0.0 {
            sign = -sign;
        }
        log += v.abs().ln();
    }
    sign * log.exp()
}

impl PathWeights {
    fn default_mode(&self) -> ProductMode {
        if self.factors.len() - 1 > LOG_PRODUCT_THRESHOLD {
            ProductMode::LogMagnitude
        } else {
            ProductMode::Direct
        }
    }

    /// `prod_k theta_k`.
    pub fn price(&self) -> f64 {
        self.price_in(self.default_mode())
    }

    /// `sum_k delta_k theta^{I1,k}`; divide by `s0 T` for the Delta.
    pub fn delta(&self) -> f64 {
        self.delta_in(self.default_mode())
    }

    /// The Vega product weight; divide by `T` for the Vega.
    pub fn vega(&self) -> f64 {
        self.vega_in(self.default_mode())
    }

    pub fn price_in(&self, mode: ProductMode) -> f64 {
        let t = self.factors.iter().map(|f| f.theta);
        match mode {
            ProductMode::Direct => t.product(),
            ProductMode::LogMagnitude => log_product(t),
        }
    }

    pub fn delta_in(&self, mode: ProductMode) -> f64 {
        let fs = &self.factors;
        let n = fs.len();
        match mode {
            ProductMode::Direct => {
                let suffix = suffix_theta(fs);
                let mut prefix = 1.0;
                let mut acc = 0.0;
                for k in 0..n {
                    acc += fs[k].delta * suffix[k] * fs[k].i1_theta * prefix;
                    prefix *= fs[k].theta;
                }
                acc
            }
            ProductMode::LogMagnitude => (0..n)
                .map(|k| {
                    fs[k].delta
                        * log_product(fs.iter().enumerate().map(|(i, f)| {
                            if i == k {
                                f.i1_theta
                            } else {
                                f.theta
                            }
                        }))
                })
                .sum(),
        }
    }

    pub fn vega_in(&self, mode: ProductMode) -> f64 {
        let fs = &self.factors;
        let n = fs.len();
        match mode {
            ProductMode::Direct => {
                let suffix = suffix_theta(fs);
                let mut remaining: f64 = fs.iter().map(|f| f.delta).sum();
                let mut e_prefix = 1.0;
                // sum_{j<k} prod_{j<i<k} theta_i theta_ex_j prod_{i<j} theta_ey_i
                let mut carry = 0.0;
                let mut acc = 0.0;
                for k in 0..n {
                    let f = &fs[k];
                    acc += f.delta
                        * suffix[k]
                        * ((f.i2_theta_ey + f.i1_theta_ex) * e_prefix + f.i1_theta * carry);
                    acc += suffix[k] * f.theta_c * e_prefix * remaining;
                    remaining -= f.delta;
                    carry = carry * f.theta + f.theta_ex * e_prefix;
                    e_prefix *= f.theta_ey;
                }
                acc
            }
            ProductMode::LogMagnitude => {
                let mut acc = 0.0;
                for k in 0..n {
                    let after_k = || fs[k + 1..].iter().map(|f| f.theta);
                    let before_ey = |j: usize| fs[..j].iter().map(|f| f.theta_ey);
                    let mut term =
                        log_product(after_k().chain([fs[k].i2_theta_ey]).chain(before_ey(k)));
                    for j in 0..=k {
                        term += log_product(
                            fs[j + 1..]
                                .iter()
                                .map(|f| f.theta)
                                .chain([fs[j].theta_c])
                                .chain(before_ey(j)),
                        );
                        term += if j < k {
                            log_product(
                                after_k()
                                    .chain([fs[k].i1_theta])
                                    .chain(fs[j + 1..k].iter().map(|f| f.theta))
                                    .chain([fs[j].theta_ex])
                                    .chain(before_ey(j)),
                            )
                        } else {
                            log_product(after_k().chain([fs[k].i1_theta_ex]).chain(before_ey(k)))
                        };
                    }
                    acc += fs[k].delta * term;
                }
                acc
            }
        }
    }
}

fn suffix_theta(fs: &[StepFactors]) -> Vec<f64> {
    let mut s = vec![1.0; fs.len()];
    for k in (0..fs.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * fs[k + 1].theta;
    }
    s
}

/// Number of product terms in the Vega weight of a path with `n_jumps` jumps.
pub fn vega_term_count(n_jumps: usize) -> usize {
    let k = n_jumps + 1;
    k + k * (k + 1)
}

pub fn price_weight(ctx: &WeightContext<'_>, path: &ChainPath) -> Result<f64> {
    Ok(path_weights(ctx, path, Need::Price)?.price())
}

pub fn delta_weight(ctx: &WeightContext<'_>, path: &ChainPath) -> Result<f64> {
    Ok(path_weights(ctx, path, Need::All)?.delta())
}

pub fn vega_weight(ctx: &WeightContext<'_>, path: &ChainPath) -> Result<f64> {
    Ok(path_weights(ctx, path, Need::All)?.vega())
}
