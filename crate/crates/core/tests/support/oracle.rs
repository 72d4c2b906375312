//! Brute-force weight oracle.
//!
//! Every weight is rebuilt from the operator definitions
//! `I_a(H) = H I_a(1) - D_a H` and `I_(a,b)(H) = I_b(I_a(H))`, applied to
//! jets of the coefficient differences. `I(1)` comes from the inverse
//! covariance of the Gaussian step, and the derivative in the previous
//! volatility state is the total derivative with the normals held fixed.
//! Path weights are then assembled by recomputing every product from
//! scratch.

use uvol::chain::{ChainPath, StepRecord};
use uvol::model::{BuiltinModelKind, SpotVol};
use uvol::renewal::JumpSampler;

use super::jet::{Jet, DEG};

/// `k`-th derivative of a scalar function.
pub type Tower = Box<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Coefficient functions with derivatives of every order.
pub struct OracleModel {
    pub r: f64,
    pub rho: f64,
    pub sigma_s: Tower,
    pub sigma_y: Tower,
    pub b_y: Tower,
}

impl OracleModel {
    pub fn from_builtin(k: &BuiltinModelKind) -> Self {
        let (lambda, mu, sy) = (k.lambda_y, k.mu, k.sigma_y);
        let sigma_s: Tower = match k.spot {
            SpotVol::BlackScholes { sigma } => {
                Box::new(move |n, _| if n == 0 { sigma } else { 0.0 })
            }
            SpotVol::SteinStein { sigma1, sigma2 } => Box::new(move |n, y| match n {
                0 => sigma1 * y + sigma2,
                1 => sigma1,
                _ => 0.0,
            }),
            SpotVol::PeriodicCosine { sigma1, sigma2 } => Box::new(move |n, y| {
                let c = match n % 4 {
                    0 => y.cos(),
                    1 => -y.sin(),
                    2 => -y.cos(),
                    _ => y.sin(),
                };
                sigma1 * c + if n == 0 { sigma2 } else { 0.0 }
            }),
        };
        Self {
            r: k.r,
            rho: k.rho,
            sigma_s,
            sigma_y: Box::new(move |n, _| if n == 0 { sy } else { 0.0 }),
            b_y: Box::new(move |n, y| match n {
                0 => lambda * (mu - y),
                1 => -lambda,
                _ => 0.0,
            }),
        }
    }
}

fn tower(f: &Tower, at: f64) -> Vec<f64> {
    (0..DEG + 2).map(|k| f(k, at)).collect()
}

/// Oracle values of one step.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleStep {
    pub theta: f64,
    pub d1_theta: f64,
    pub d2_theta: f64,
    pub dp_theta: f64,
    pub theta_ey: f64,
    pub theta_ex: f64,
    pub theta_c: f64,
    pub i1_theta: f64,
    pub i2_theta_ey: f64,
    pub i1_theta_ex: f64,
}

/// Oracle for step `st`. `last` carries the survival probability of the final
/// gap when `st` is the final step; otherwise `density` is `f(delta)`.
pub fn oracle_step(
    om: &OracleModel,
    st: &StepRecord,
    density: f64,
    last: Option<f64>,
) -> OracleStep {
    let fc = &st.fc;
    let delta = fc.delta;
    let ss = Jet::affine_p(fc.sigma_s_i, fc.sigma1_s_i);
    let sy = Jet::affine_p(fc.sigma_y_i, fc.sigma1_y_i);
    let rho = Jet::affine_p(fc.rho_i, fc.rho1_i);
    let m = Jet::affine_p(fc.m_i, fc.m1_i);
    let a_s = Jet::affine_p(fc.a_s_i, fc.a1_s_i);
    let x = Jet::var_x(st.x_next);
    let y = Jet::var_y(st.y_next);
    let one = Jet::constant(1.0);

    // Mean and covariance of the Gaussian step as functions of p.
    let u = x - (Jet::constant(st.x_prev + om.r * delta) - a_s * 0.5);
    let w = y - m;
    let (c11, c22, c12) = (ss * ss, sy * sy, rho * ss * sy);
    let inv_det = (c11 * c22 - c12 * c12).recip();
    let i1_1 = (c22 * u - c12 * w) * inv_det;
    let i2_1 = (c11 * w - c12 * u) * inv_det;
    let op1 = |h: Jet| h * i1_1 - h.dx();
    let op2 = |h: Jet| h * i2_1 - h.dy();

    // Normals as functions of the new state.
    let q = one - rho * rho;
    let sq = q.sqrt();
    let z1 = u * ss.recip();
    let z2 = (w * sy.recip() - rho * z1) * sq.recip();
    let w_z = rho * z1 + sq * z2;
    let v_z = sq * z1 - rho * z2;

    // Flow derivatives of the new state in p with the normals fixed.
    let xp = Jet::constant(-0.5 * fc.a1_s_i) + z1 * fc.sigma1_s_i;
    let y_noise = w_z * fc.sigma1_y_i
        + v_z * (fc.sigma_y_i * fc.rho1_i / fc.rho_i.mul_add(-fc.rho_i, 1.0).sqrt());
    let yp = Jet::constant(fc.m1_i) + y_noise;
    let dp = |h: Jet| h.dp() + (xp * h.dx()).drop_p() + (yp * h.dy()).drop_p();

    if let Some(surv) = last {
        let theta = Jet::constant(1.0 / surv);
        let theta_ey = theta * yp;
        let theta_ex = theta * xp;
        return OracleStep {
            theta: theta.value(),
            theta_ey: theta_ey.value(),
            theta_ex: theta_ex.value(),
            i1_theta: op1(theta).value(),
            i2_theta_ey: op2(theta_ey).value(),
            i1_theta_ex: op1(theta_ex).value(),
            ..Default::default()
        };
    }

    let at_y = |f: &Tower| y.compose(&tower(f, st.y_next));
    let at_m = |f: &Tower| m.compose(&tower(f, fc.m_i));
    let (s_y, s_m) = (at_y(&om.sigma_s), at_m(&om.sigma_s));
    let (v_y, v_m) = (at_y(&om.sigma_y), at_m(&om.sigma_y));
    let c_s = (s_y * s_y - s_m * s_m) * 0.5;
    let c_y = (v_y * v_y - v_m * v_m) * 0.5;
    let b = at_y(&om.b_y) - at_m(&om.b_y);
    let c_ys = (s_y * v_y - s_m * v_m) * om.rho;

    let inv_f = 1.0 / density;
    let theta = (op1(op1(c_s)) - op1(c_s) + op2(op2(c_y)) + op2(b) + op2(op1(c_ys))) * inv_f;

    let m1 = Jet::constant(fc.m1_i);
    let d_s = m1 * c_s;
    let d_y = m1 * c_y;
    let d_ys = m1 * c_ys;
    let e_ys = -(m1 * c_s) + dp(c_ys);
    let e_yy = m1 * b + dp(c_y);
    let e_xs = dp(c_s);
    let theta_ey = (op1(op1(d_s)) + op2(op2(d_y)) + op1(e_ys) + op2(e_yy) + op2(op1(d_ys))) * inv_f;
    let theta_ex = op1(e_xs) * inv_f;
    let dp_theta = dp(theta);
    let theta_c =
        op1(xp * theta - theta_ex) + dp_theta + op2(m1 * theta - theta_ey + y_noise * theta);

    OracleStep {
        theta: theta.value(),
        d1_theta: theta.dx().value(),
        d2_theta: theta.dy().value(),
        dp_theta: dp_theta.value(),
        theta_ey: theta_ey.value(),
        theta_ex: theta_ex.value(),
        theta_c: theta_c.value(),
        i1_theta: op1(theta).value(),
        i2_theta_ey: op2(theta_ey).value(),
        i1_theta_ex: op1(theta_ex).value(),
    }
}

/// Oracle values for every step of a path.
pub fn oracle_path_steps(om: &OracleModel, s: &JumpSampler, path: &ChainPath) -> Vec<OracleStep> {
    let n = path.steps.len();
    path.steps
        .iter()
        .enumerate()
        .map(|(k, st)| {
            if k + 1 == n {
                oracle_step(om, st, f64::NAN, Some(s.survival(st.fc.delta)))
            } else {
                oracle_step(om, st, s.density(st.fc.delta).unwrap(), None)
            }
        })
        .collect()
}

/// `(price, delta, vega)` product weights, every product recomputed.
pub fn oracle_path_weights(steps: &[OracleStep], deltas: &[f64]) -> (f64, f64, f64) {
    let n = steps.len();
    let prod = |range: std::ops::Range<usize>, f: &dyn Fn(&OracleStep) -> f64| {
        steps[range].iter().map(f).product::<f64>()
    };
    let theta = |s: &OracleStep| s.theta;
    let theta_ey = |s: &OracleStep| s.theta_ey;

    let price = prod(0..n, &theta);
    let mut delta = 0.0;
    for k in 0..n {
        delta += deltas[k] * prod(k + 1..n, &theta) * steps[k].i1_theta * prod(0..k, &theta);
    }
    let mut vega = 0.0;
    for k in 0..n {
        let mut term = prod(k + 1..n, &theta) * steps[k].i2_theta_ey * prod(0..k, &theta_ey);
        for j in 0..=k {
            term += prod(j + 1..n, &theta) * steps[j].theta_c * prod(0..j, &theta_ey);
            term += if j < k {
                prod(k + 1..n, &theta)
                    * steps[k].i1_theta
                    * prod(j + 1..k, &theta)
                    * steps[j].theta_ex
                    * prod(0..j, &theta_ey)
            } else {
                prod(k + 1..n, &theta) * steps[k].i1_theta_ex * prod(0..k, &theta_ey)
            };
        }
        vega += deltas[k] * term;
    }
    (price, delta, vega)
}
