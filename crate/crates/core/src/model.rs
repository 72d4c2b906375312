//! Coefficient functions of the stochastic volatility model.
//!
//! In log-spot coordinates `X = ln S` the dynamics read
//!
//! ```text
//! dX = (r - sigma_S(Y)^2 / 2) dt + sigma_S(Y) dW
//! dY = b_Y(Y) dt + sigma_Y(Y) dB,      d<W, B> = rho dt
//! ```
//!
//! A [`Model`] stores the coefficients as shareable function handles together
//! with their derivatives. Built-in models carry analytic derivatives and
//! enable closed-form shortcuts in [`crate::flow`]; custom models only need
//! the handles.

use std::fmt;
use std::sync::Arc;

use crate::error::{param, Result};

/// A thread-safe scalar function handle.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Spot diffusion coefficient of a built-in model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpotVol {
    /// `sigma_S(y) = sigma`.
    BlackScholes { sigma: f64 },
    /// `sigma_S(y) = sigma1 * y + sigma2`.
    SteinStein { sigma1: f64, sigma2: f64 },
    /// `sigma_S(y) = sigma1 * cos(y) + sigma2`, with `sigma2 - sigma1 > 0`.
    PeriodicCosine { sigma1: f64, sigma2: f64 },
}

/// Full parameter set of a built-in model. All built-ins share the
/// Ornstein–Uhlenbeck drift `b_Y(y) = lambda_y * (mu - y)` and a constant
/// vol-of-vol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuiltinModelKind {
    pub spot: SpotVol,
    pub lambda_y: f64,
    pub mu: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub r: f64,
}

impl BuiltinModelKind {
    /// The reference parameter set of the built-in models:
    /// `r = 0.03`, `lambda_y = 0.5`, `mu = 0.3`, `sigma_y = 0.2`, `rho = 0.6`.
    pub fn with_defaults(spot: SpotVol) -> Self {
        Self {
            spot,
            lambda_y: 0.5,
            mu: 0.3,
            sigma_y: 0.2,
            rho: 0.6,
            r: 0.03,
        }
    }
}

/// Vol-of-vol specification for custom models.
#[derive(Clone)]
pub enum VolOfVol {
    Constant(f64),
    /// `sigma_Y` and its first derivative. The weight engine rejects this
    /// variant because its closed forms assume a constant vol-of-vol.
    Function {
        sigma: ScalarFn,
        sigma1: ScalarFn,
    },
}

/// Coefficient handles for a user-supplied model.
#[derive(Clone)]
pub struct CustomCoefficients {
    pub b_y: ScalarFn,
    pub b1_y: ScalarFn,
    pub b2_y: ScalarFn,
    pub sigma_s: ScalarFn,
    pub sigma1_s: ScalarFn,
    pub sigma2_s: ScalarFn,
    pub vol_of_vol: VolOfVol,
}

/// Numerical knobs for frozen-coefficient integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quadrature {
    /// Composite Simpson 3/8 panels per interval.
    pub panels: usize,
    /// RK4 step is at most `delta / rk4_divisor`.
    pub rk4_divisor: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            panels: 8,
            rk4_divisor: 16,
        }
    }
}

/// A two-factor stochastic volatility model.
#[derive(Clone)]
pub struct Model {
    pub r: f64,
    pub rho: f64,
    /// Declared ellipticity constant: `1/kappa <= sigma^2 <= kappa`.
    pub kappa: f64,
    pub b_y: ScalarFn,
    pub b1_y: ScalarFn,
    pub b2_y: ScalarFn,
    pub sigma_s: ScalarFn,
    pub sigma1_s: ScalarFn,
    pub sigma2_s: ScalarFn,
    pub sigma_y: ScalarFn,
    pub sigma1_y: ScalarFn,
    pub quadrature: Quadrature,
    builtin: Option<BuiltinModelKind>,
    constant_sigma_y: Option<f64>,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("r", &self.r)
            .field("rho", &self.rho)
            .field("kappa", &self.kappa)
            .field("builtin", &self.builtin)
            .field("constant_sigma_y", &self.constant_sigma_y)
            .field("quadrature", &self.quadrature)
            .finish_non_exhaustive()
    }
}

fn arc(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(param(name, format!("must be finite, got {v}")))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    check_finite("rho", rho)?;
    if rho.abs() >= 1.0 {
        return Err(param("rho", format!("|rho| must be < 1, got {rho}")));
    }
    Ok(())
}

/// Builds a built-in model with analytic derivatives.
pub fn make_builtin(kind: BuiltinModelKind) -> Result<Model> {
    let BuiltinModelKind {
        spot,
        lambda_y,
        mu,
        sigma_y,
        rho,
        r,
    } = kind;
    check_finite("r", r)?;
    check_finite("mu", mu)?;
    check_rho(rho)?;
    if !(lambda_y.is_finite() && lambda_y > 0.0) {
        return Err(param(
            "lambda_y",
            format!("must be positive, got {lambda_y}"),
        ));
    }
    if !(sigma_y.is_finite() && sigma_y > 0.0) {
        return Err(param("sigma_y", format!("must be positive, got {sigma_y}")));
    }

    let (sigma_s, sigma1_s, sigma2_s, spot_lo, spot_hi): (ScalarFn, ScalarFn, ScalarFn, f64, f64) =
        match spot {
            SpotVol::BlackScholes { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(param("sigma_s", format!("must be positive, got {sigma}")));
                }
                (
                    arc(move |_| sigma),
                    arc(|_| 0.0),
                    arc(|_| 0.0),
                    sigma,
                    sigma,
                )
            }
            SpotVol::SteinStein { sigma1, sigma2 } => {
                check_finite("sigma1", sigma1)?;
                check_finite("sigma2", sigma2)?;
                // The affine coefficient is unbounded, so the declared kappa is
                // taken over a band of five stationary standard deviations.
                let half = 5.0 * sigma_y / (2.0 * lambda_y).sqrt();
                let a = sigma1 * (mu - half) + sigma2;
                let b = sigma1 * (mu + half) + sigma2;
                let lo = if a * b <= 0.0 {
                    0.0
                } else {
                    a.abs().min(b.abs())
                };
                (
                    arc(move |y| sigma1 * y + sigma2),
                    arc(move |_| sigma1),
                    arc(|_| 0.0),
                    lo,
                    a.abs().max(b.abs()),
                )
            }
            SpotVol::PeriodicCosine { sigma1, sigma2 } => {
                check_finite("sigma1", sigma1)?;
                check_finite("sigma2", sigma2)?;
                if sigma2 - sigma1 <= 0.0 {
                    return Err(param(
                        "sigma2",
                        format!(
                            "periodic model needs sigma2 - sigma1 > 0, got {sigma2} - {sigma1}"
                        ),
                    ));
                }
                (
                    arc(move |y| sigma1 * y.cos() + sigma2),
                    arc(move |y| -sigma1 * y.sin()),
                    arc(move |y| -sigma1 * y.cos()),
                    sigma2 - sigma1.abs(),
                    sigma2 + sigma1.abs(),
                )
            }
        };

    let kappa = [
        spot_hi * spot_hi,
        1.0 / (spot_lo * spot_lo),
        sigma_y * sigma_y,
        1.0 / (sigma_y * sigma_y),
    ]
    .into_iter()
    .fold(1.0, f64::max);

    Ok(Model {
        r,
        rho,
        kappa,
        b_y: arc(move |y| lambda_y * (mu - y)),
        b1_y: arc(move |_| -lambda_y),
        b2_y: arc(|_| 0.0),
        sigma_s,
        sigma1_s,
        sigma2_s,
        sigma_y: arc(move |_| sigma_y),
        sigma1_y: arc(|_| 0.0),
        quadrature: Quadrature::default(),
        builtin: Some(kind),
        constant_sigma_y: Some(sigma_y),
    })
}

impl Model {
    /// Same as [`make_builtin`].
    pub fn builtin(kind: BuiltinModelKind) -> Result<Self> {
        make_builtin(kind)
    }

    /// Builds a model from user-supplied handles. Frozen coefficients of such
    /// models always go through RK4 and Simpson quadrature.
    pub fn custom(r: f64, rho: f64, kappa: f64, c: CustomCoefficients) -> Result<Self> {
        check_finite("r", r)?;
        check_rho(rho)?;
        if !(kappa.is_finite() && kappa >= 1.0) {
            return Err(param("kappa", format!("must be >= 1, got {kappa}")));
        }
        let (sigma_y, sigma1_y, constant_sigma_y) = match c.vol_of_vol {
            VolOfVol::Constant(v) => {
                if !(v.is_finite() && v > 0.0) {
                    return Err(param("sigma_y", format!("must be positive, got {v}")));
                }
                (arc(move |_| v), arc(|_| 0.0), Some(v))
            }
            VolOfVol::Function { sigma, sigma1 } => (sigma, sigma1, None),
        };
        Ok(Model {
            r,
            rho,
            kappa,
            b_y: c.b_y,
            b1_y: c.b1_y,
            b2_y: c.b2_y,
            sigma_s: c.sigma_s,
            sigma1_s: c.sigma1_s,
            sigma2_s: c.sigma2_s,
            sigma_y,
            sigma1_y,
            quadrature: Quadrature::default(),
            builtin: None,
            constant_sigma_y,
        })
    }

    pub fn with_quadrature(mut self, q: Quadrature) -> Result<Self> {
        if q.panels == 0 {
            return Err(param("panels", "must be at least 1"));
        }
        if q.rk4_divisor == 0 {
            return Err(param("rk4_divisor", "must be at least 1"));
        }
        self.quadrature = q;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 1.0) {
            return Err(param("kappa", format!("must be >= 1, got {kappa}")));
        }
        self.kappa = kappa;
        Ok(self)
    }

    /// Returns a copy with the interest rate replaced.
    pub fn with_rate(mut self, r: f64) -> Result<Self> {
        check_finite("r", r)?;
        self.r = r;
        if let Some(kind) = self.builtin.as_mut() {
            kind.r = r;
        }
        Ok(self)
    }

    pub fn builtin_kind(&self) -> Option<&BuiltinModelKind> {
        self.builtin.as_ref()
    }

    /// `(lambda_y, mu)` when the drift is the built-in Ornstein–Uhlenbeck one.
    pub fn ou_drift(&self) -> Option<(f64, f64)> {
        self.builtin.map(|k| (k.lambda_y, k.mu))
    }

    pub fn constant_sigma_y(&self) -> Option<f64> {
        self.constant_sigma_y
    }

    /// `a_S(y) = sigma_S(y)^2`.
    #[inline]
    pub fn a_s(&self, y: f64) -> f64 {
        let s = (self.sigma_s)(y);
        s * s
    }
}

/// Outcome of [`validate_model`]. Validation is advisory: a failing report
/// does not prevent simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub min_sigma_s_sq: f64,
    pub max_sigma_s_sq: f64,
    pub min_sigma_y_sq: f64,
    pub max_sigma_y_sq: f64,
    /// `1/kappa <= sigma_S^2 <= kappa` on the whole grid.
    pub spot_elliptic: bool,
    /// `1/kappa <= sigma_Y^2 <= kappa` on the whole grid.
    pub vol_elliptic: bool,
    /// Largest `|fd - handle| / max(1, |handle|)` over all derivative handles,
    /// with central differences of step `1e-5`.
    pub max_derivative_error: f64,
    pub derivatives_consistent: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.spot_elliptic && self.vol_elliptic && self.derivatives_consistent
    }
}

const FD_STEP: f64 = 1e-5;
const DERIVATIVE_TOL: f64 = 1e-5;

fn fd_error(f: &ScalarFn, df: &ScalarFn, x: f64) -> f64 {
    let fd = (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP);
    let d = df(x);
    (fd - d).abs() / d.abs().max(1.0)
}

/// Checks the ellipticity bounds and derivative consistency on `grid`.
pub fn validate_model(m: &Model, grid: &[f64]) -> ValidationReport {
    let mut r = ValidationReport {
        min_sigma_s_sq: f64::INFINITY,
        max_sigma_s_sq: f64::NEG_INFINITY,
        min_sigma_y_sq: f64::INFINITY,
        max_sigma_y_sq: f64::NEG_INFINITY,
        spot_elliptic: true,
        vol_elliptic: true,
        max_derivative_error: 0.0,
        derivatives_consistent: true,
        warnings: Vec::new(),
    };
    if grid.is_empty() {
        r.warnings.push("empty validation grid".into());
        return r;
    }
    let lo = 1.0 / m.kappa;
    for &x in grid {
        let s2 = m.a_s(x);
        let sy = (m.sigma_y)(x);
        let y2 = sy * sy;
        r.min_sigma_s_sq = r.min_sigma_s_sq.min(s2);
        r.max_sigma_s_sq = r.max_sigma_s_sq.max(s2);
        r.min_sigma_y_sq = r.min_sigma_y_sq.min(y2);
        r.max_sigma_y_sq = r.max_sigma_y_sq.max(y2);
        let errs = [
            fd_error(&m.sigma_s, &m.sigma1_s, x),
            fd_error(&m.sigma1_s, &m.sigma2_s, x),
            fd_error(&m.b_y, &m.b1_y, x),
            fd_error(&m.b1_y, &m.b2_y, x),
            fd_error(&m.sigma_y, &m.sigma1_y, x),
        ];
        for e in errs {
            r.max_derivative_error = r.max_derivative_error.max(e);
        }
    }
    r.spot_elliptic = r.min_sigma_s_sq >= lo && r.max_sigma_s_sq <= m.kappa;
    r.vol_elliptic = r.min_sigma_y_sq >= lo && r.max_sigma_y_sq <= m.kappa;
    r.derivatives_consistent = r.max_derivative_error <= DERIVATIVE_TOL;
    if !r.spot_elliptic {
        r.warnings.push(format!(
            "sigma_S^2 ranges over [{:.6}, {:.6}] on the grid, outside [1/kappa, kappa] = [{:.6}, {:.6}]: \
             the non-degeneracy assumption fails and weight moments may be heavy-tailed",
            r.min_sigma_s_sq, r.max_sigma_s_sq, lo, m.kappa
        ));
    }
    if !r.vol_elliptic {
        r.warnings.push(format!(
            "sigma_Y^2 ranges over [{:.6}, {:.6}] on the grid, outside [1/kappa, kappa] = [{:.6}, {:.6}]",
            r.min_sigma_y_sq, r.max_sigma_y_sq, lo, m.kappa
        ));
    }
    if !r.derivatives_consistent {
        r.warnings.push(format!(
            "derivative handles disagree with central differences (max error {:.3e})",
            r.max_derivative_error
        ));
    }
    r
}
