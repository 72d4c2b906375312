//! Shared helpers for the integration tests: Gauss–Hermite quadrature, the
//! reference models, random paths and the identity checks reused by the
//! acceptance target.
#![allow(dead_code)]

pub mod jet;
pub mod oracle;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uvol::chain::{chain_step, simulate_chain_with_normals, ChainPath, StepRecord};
use uvol::model::{make_builtin, BuiltinModelKind, Model, SpotVol};
use uvol::renewal::{JumpSampler, TimeGrid};
use uvol::weights::{
    base_operators, path_weights, step_weights, terminal_weights, Need, ProductMode, WeightContext,
};

use oracle::{oracle_path_steps, oracle_path_weights, OracleModel};

pub const T: f64 = 0.5;
pub const X0: f64 = 0.4;
pub const Y0: f64 = 0.2;
pub const STRIKE: f64 = 1.5;

/// Gauss–Hermite rule for `E[g(Z)]`, `Z ~ N(0, 1)`, as `(node, weight)` pairs.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    // Newton iteration on the orthonormal physicists' Hermite polynomials.
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let s = std::f64::consts::SQRT_2;
    let norm = PI.sqrt();
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (s * xi, wi / norm))
        .collect()
}

/// Tensor-product rule for `E[g(Z1, Z2)]` with independent standard normals.
pub fn gauss_hermite_2d(n: usize) -> Vec<(f64, f64, f64)> {
    let g = gauss_hermite(n);
    let mut out = Vec::with_capacity(n * n);
    for &(a, wa) in &g {
        for &(b, wb) in &g {
            out.push((a, b, wa * wb));
        }
    }
    out
}

pub fn kind(spot: SpotVol) -> BuiltinModelKind {
    BuiltinModelKind::with_defaults(spot)
}

/// One representative of each built-in family.
pub fn reference_kinds() -> Vec<(&'static str, BuiltinModelKind)> {
    vec![
        ("black-scholes", kind(SpotVol::BlackScholes { sigma: 0.25 })),
        (
            "stein-stein",
            kind(SpotVol::SteinStein {
                sigma1: 0.2,
                sigma2: 0.25,
            }),
        ),
        (
            "periodic-cosine",
            kind(SpotVol::PeriodicCosine {
                sigma1: 0.3,
                sigma2: 0.4,
            }),
        ),
    ]
}

pub fn build(k: &BuiltinModelKind) -> Model {
    make_builtin(*k).expect("valid model")
}

/// Random `(y, delta)` configurations with a fixed seed.
pub fn random_configs(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(-0.5..0.9), rng.random_range(0.02..0.5)))
        .collect()
}

/// Checks `E[D_a f] = E[f I_a(1)]` and `E[D_a D_b f] = E[f I_(a,b)(1)]` for
/// monomials of degree at most two. Returns the largest absolute error.
pub fn duality_max_error(model: &Model, configs: &[(f64, f64)]) -> f64 {
    let nodes = gauss_hermite_2d(24);
    let mut worst = 0.0f64;
    // f(x, y) = (x - x0)^i (y - y0)^j around the step's start.
    let monomials = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
    for &(y, delta) in configs {
        for &(i, j) in &monomials {
            let f = |x: f64, yy: f64| (x - X0).powi(i) * (yy - y).powi(j);
            let dpow = |v: f64, k: i32, ord: i32| -> f64 {
                match (k, ord) {
                    (_, 0) => v.powi(k),
                    (1, 1) => 1.0,
                    (2, 1) => 2.0 * v,
                    (2, 2) => 2.0,
                    _ => 0.0,
                }
            };
            // Derivatives in (x, y) of order (ox, oy).
            let df = |x: f64, yy: f64, ox: i32, oy: i32| dpow(x - X0, i, ox) * dpow(yy - y, j, oy);
            let mut lhs = [0.0; 5];
            let mut rhs = [0.0; 5];
            for &(z1, z2, w) in &nodes {
                let st = chain_step(model, 1, X0, y, delta, z1, z2).unwrap();
                let b = base_operators(&st).unwrap();
                let (xn, yn) = (st.x_next, st.y_next);
                let fv = f(xn, yn);
                let i11 = b.i1_1 * b.i1_1 - b.d1_i1_1;
                let i22 = b.i2_1 * b.i2_1 - b.d2_i2_1;
                let i12 = b.i1_1 * b.i2_1 - b.d2_i1_1;
                lhs[0] += w * df(xn, yn, 1, 0);
                rhs[0] += w * fv * b.i1_1;
                lhs[1] += w * df(xn, yn, 0, 1);
                rhs[1] += w * fv * b.i2_1;
                lhs[2] += w * df(xn, yn, 2, 0);
                rhs[2] += w * fv * i11;
                lhs[3] += w * df(xn, yn, 0, 2);
                rhs[3] += w * fv * i22;
                lhs[4] += w * df(xn, yn, 1, 1);
                rhs[4] += w * fv * i12;
            }
            for k in 0..5 {
                worst = worst.max((lhs[k] - rhs[k]).abs());
            }
        }
    }
    worst
}

/// Polynomial test function for the transfer identities, with derivatives.
fn h_poly(x: f64, y: f64) -> (f64, f64, f64) {
    let (u, v) = (x - X0, y - Y0);
    let h = 1.0 + 0.7 * u - 0.4 * v + 0.9 * u * u + 0.5 * u * v - 0.8 * v * v + 0.3 * u * v * v;
    let hx = 0.7 + 1.8 * u + 0.5 * v + 0.3 * v * v;
    let hy = -0.4 + 0.5 * u - 1.6 * v + 0.6 * u * v;
    (h, hx, hy)
}

/// Gaussian weight multiplying the chain-rule functionals so that they do not
/// vanish by duality.
fn phi(z1: f64, z2: f64) -> f64 {
    1.0 + 0.3 * z1 - 0.2 * z2 + 0.1 * z1 * z2 + 0.05 * z1 * z1
}

/// Step from `(X0, y)` over `delta` with fixed normals.
fn step_at(model: &Model, y: f64, delta: f64, z1: f64, z2: f64) -> StepRecord {
    chain_step(model, 1, X0, y, delta, z1, z2).unwrap()
}

/// Chain rules for `I1(H)`, `I2(H)` with `H = h(X', Y')`, checked against a
/// central difference in the previous volatility with the normals held fixed,
/// integrated against a polynomial weight. Returns the largest error.
pub fn chain_rule_max_error(model: &Model, configs: &[(f64, f64)]) -> f64 {
    let nodes = gauss_hermite_2d(20);
    let eps = 1e-4;
    let mut worst = 0.0f64;
    let ops = |st: &StepRecord| {
        let b = base_operators(st).unwrap();
        let (h, hx, hy) = h_poly(st.x_next, st.y_next);
        (h * b.i1_1 - hx, h * b.i2_1 - hy)
    };
    for &(y, delta) in configs {
        let (mut lhs1, mut lhs2, mut rhs1, mut rhs2) = (0.0, 0.0, 0.0, 0.0);
        for &(z1, z2, w) in &nodes {
            let up = ops(&step_at(model, y + eps, delta, z1, z2));
            let dn = ops(&step_at(model, y - eps, delta, z1, z2));
            let g = w * phi(z1, z2);
            lhs1 += g * (up.0 - dn.0) / (2.0 * eps);
            lhs2 += g * (up.1 - dn.1) / (2.0 * eps);

            let st = step_at(model, y, delta, z1, z2);
            let fc = &st.fc;
            let b = base_operators(&st).unwrap();
            let q = 1.0 - fc.rho_i * fc.rho_i;
            // Flow derivatives of the new state.
            let xp = -0.5 * fc.a1_s_i + fc.sigma1_s_i * z1;
            let yp = fc.m1_i
                + fc.sigma1_y_i * (fc.rho_i * z1 + q.sqrt() * z2)
                + fc.sigma_y_i * fc.rho1_i / q.sqrt() * (q.sqrt() * z1 - fc.rho_i * z2);
            // Their state derivatives, from the affine dependence of Z on (X', Y').
            let dz1_dx = 1.0 / fc.sigma_s_i;
            let dz2_dx = -fc.rho_i / (q.sqrt() * fc.sigma_s_i);
            let dz2_dy = 1.0 / (q.sqrt() * fc.sigma_y_i);
            let dyp = |dz1: f64, dz2: f64| {
                fc.sigma1_y_i * (fc.rho_i * dz1 + q.sqrt() * dz2)
                    + fc.sigma_y_i * fc.rho1_i / q.sqrt() * (q.sqrt() * dz1 - fc.rho_i * dz2)
            };
            let (xp_x, xp_y) = (fc.sigma1_s_i * dz1_dx, 0.0);
            let (yp_x, yp_y) = (dyp(dz1_dx, dz2_dx), dyp(0.0, dz2_dy));
            let (u, v) = (st.x_next - X0, st.y_next - Y0);
            let (h, hx, hy) = h_poly(st.x_next, st.y_next);
            let hxx = 1.8;
            let hxy = 0.5 + 0.6 * v;
            let hyy = -1.6 + 0.6 * u;
            let dph = hx * xp + hy * yp;
            let dph_x = hxx * xp + hx * xp_x + hxy * yp + hy * yp_x;
            let dph_y = hxy * xp + hx * xp_y + hyy * yp + hy * yp_y;
            let i1h = h * b.i1_1 - hx;
            let i2h = h * b.i2_1 - hy;
            let ss = fc.sigma1_s_i / fc.sigma_s_i;
            let sy = fc.sigma1_y_i / fc.sigma_y_i;
            let k = fc.rho1_i / q;
            let r1 = (dph * b.i1_1 - dph_x) - ss * i1h - k * fc.sigma_y_i / fc.sigma_s_i * i2h;
            let r2 = (dph * b.i2_1 - dph_y) - (sy - k * fc.rho_i) * i2h;
            rhs1 += g * r1;
            rhs2 += g * r2;
        }
        worst = worst.max((lhs1 - rhs1).abs()).max((lhs2 - rhs2).abs());
    }
    worst
}

/// Transfer-of-derivative identities for interior and final steps with a
/// polynomial test function. Returns the largest error.
pub fn transfer_max_error(model: &Model, sampler: &JumpSampler, configs: &[(f64, f64)]) -> f64 {
    let ctx = WeightContext::new(model, sampler).unwrap();
    let nodes = gauss_hermite_2d(40);
    let eps = 1e-4;
    let mut worst = 0.0f64;
    for &(y, delta) in configs {
        // Interior step: d/dy E[h theta] and d/dx E[h theta].
        let functional = |x0: f64, y0: f64| -> f64 {
            nodes
                .iter()
                .map(|&(z1, z2, w)| {
                    let st = chain_step(model, 1, x0, y0, delta, z1, z2).unwrap();
                    let sw = step_weights(&ctx, &st).unwrap();
                    w * h_poly(st.x_next, st.y_next).0 * sw.theta
                })
                .sum()
        };
        let lhs_y = (functional(X0, y + eps) - functional(X0, y - eps)) / (2.0 * eps);
        let lhs_x = (functional(X0 + eps, y) - functional(X0 - eps, y)) / (2.0 * eps);
        let (mut rhs_y, mut rhs_x) = (0.0, 0.0);
        for &(z1, z2, w) in &nodes {
            let st = chain_step(model, 1, X0, y, delta, z1, z2).unwrap();
            let sw = step_weights(&ctx, &st).unwrap();
            let (h, hx, hy) = h_poly(st.x_next, st.y_next);
            rhs_y += w * (hy * sw.theta_ey + hx * sw.theta_ex + h * sw.theta_c);
            rhs_x += w * hx * sw.theta;
        }
        worst = worst.max((lhs_y - rhs_y).abs()).max((lhs_x - rhs_x).abs());

        // Final step: the survival weight does not depend on the state.
        let functional_last = |y0: f64| -> f64 {
            nodes
                .iter()
                .map(|&(z1, z2, w)| {
                    let st = chain_step(model, 1, X0, y0, delta, z1, z2).unwrap();
                    let tw = terminal_weights(&ctx, &st).unwrap();
                    w * h_poly(st.x_next, st.y_next).0 * tw.theta_last
                })
                .sum()
        };
        let lhs_last = (functional_last(y + eps) - functional_last(y - eps)) / (2.0 * eps);
        let mut rhs_last = 0.0;
        for &(z1, z2, w) in &nodes {
            let st = chain_step(model, 1, X0, y, delta, z1, z2).unwrap();
            let tw = terminal_weights(&ctx, &st).unwrap();
            let (_, hx, hy) = h_poly(st.x_next, st.y_next);
            rhs_last += w * (hy * tw.theta_ey_last + hx * tw.theta_ex_last);
        }
        worst = worst.max((lhs_last - rhs_last).abs());
    }
    worst
}

/// Relative error used by the oracle comparisons: `|a - b| / max(|b|, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Draws a random path with at most `max_jumps` jumps on `[0, T]`.
pub fn random_path(
    model: &Model,
    sampler: &JumpSampler,
    max_jumps: usize,
    rng: &mut ChaCha8Rng,
) -> ChainPath {
    loop {
        let grid = uvol::renewal::sample_grid(sampler, T, rng);
        if grid.n_jumps() > max_jumps {
            continue;
        }
        let normals: Vec<(f64, f64)> = (0..=grid.n_jumps())
            .map(|_| {
                (
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                )
            })
            .collect();
        let y0 = rng.random_range(-0.3..0.7);
        return simulate_chain_with_normals(model, X0, y0, grid, &normals).unwrap();
    }
}

/// Largest oracle discrepancy over `n_paths` random paths per model.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleReport {
    pub steps: f64,
    pub price: f64,
    pub delta: f64,
    pub vega: f64,
    pub n_paths: usize,
}

impl OracleReport {
    pub fn worst(&self) -> f64 {
        self.steps.max(self.price).max(self.delta).max(self.vega)
    }
}

pub fn oracle_comparison(n_paths: usize, seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = reference_kinds();
    let samplers = [
        JumpSampler::exponential(3.0).unwrap(),
        JumpSampler::beta(0.3, 1.0).unwrap(),
    ];
    let mut rep = OracleReport::default();
    for p in 0..n_paths {
        let (_, k) = &kinds[p % kinds.len()];
        let model = build(k);
        let om = OracleModel::from_builtin(k);
        let sampler = &samplers[(p / kinds.len()) % samplers.len()];
        let ctx = WeightContext::new(&model, sampler).unwrap();
        let path = random_path(&model, sampler, 4, &mut rng);
        let o = oracle_path_steps(&om, sampler, &path);
        let n = path.steps.len();
        for (k, st) in path.steps.iter().enumerate() {
            let ok = &o[k];
            let pairs: Vec<(f64, f64)> = if k + 1 < n {
                let w = step_weights(&ctx, st).unwrap();
                vec![
                    (w.theta, ok.theta),
                    (w.d1_theta, ok.d1_theta),
                    (w.d2_theta, ok.d2_theta),
                    (w.d2prev_theta, ok.dp_theta),
                    (w.theta_ey, ok.theta_ey),
                    (w.theta_ex, ok.theta_ex),
                    (w.theta_c, ok.theta_c),
                    (w.i1_theta, ok.i1_theta),
                    (w.i2_theta_ey, ok.i2_theta_ey),
                    (w.i1_theta_ex, ok.i1_theta_ex),
                ]
            } else {
                let w = terminal_weights(&ctx, st).unwrap();
                vec![
                    (w.theta_last, ok.theta),
                    (w.theta_ey_last, ok.theta_ey),
                    (w.theta_ex_last, ok.theta_ex),
                    (w.i1_theta_last, ok.i1_theta),
                    (w.i2_theta_ey_last, ok.i2_theta_ey),
                    (w.i1_theta_ex_last, ok.i1_theta_ex),
                ]
            };
            for (a, b) in pairs {
                rep.steps = rep.steps.max(rel_err(a, b));
            }
        }
        let deltas: Vec<f64> = path.grid.deltas().collect();
        let (op, od, ov) = oracle_path_weights(&o, &deltas);
        let price_w = path_weights(&ctx, &path, Need::Price).unwrap();
        let all_w = path_weights(&ctx, &path, Need::All).unwrap();
        for mode in [ProductMode::Direct, ProductMode::LogMagnitude] {
            rep.price = rep
                .price
                .max(rel_err(price_w.price_in(mode), op))
                .max(rel_err(all_w.price_in(mode), op));
            rep.delta = rep.delta.max(rel_err(all_w.delta_in(mode), od));
            rep.vega = rep.vega.max(rel_err(all_w.vega_in(mode), ov));
        }
        rep.n_paths += 1;
    }
    rep
}

/// A grid with explicit jump times on `[0, T]`.
pub fn grid(jumps: &[f64]) -> TimeGrid {
    TimeGrid::from_jumps(jumps, T).unwrap()
}
