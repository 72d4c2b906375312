//! Truncated Taylor jets in `(p, x, y)`.
//!
//! A jet stores the Taylor coefficients of a smooth function around an
//! expansion point, in the deviations `p - p0`, `x - x0`, `y - y0`. The `p`
//! direction is kept to first order and `(x, y)` to total degree [`DEG`].
//! Every derivative costs one degree of accuracy, so values at the expansion
//! point stay exact as long as fewer than `DEG` derivatives are stacked.

use std::ops::{Add, Mul, Neg, Sub};

pub const DEG: usize = 7;
const N: usize = DEG + 1;

#[derive(Clone, Copy, Debug)]
pub struct Jet {
    /// `c[e][i][j]` multiplies `p^e x^i y^j`, with `i + j <= DEG`.
    c: [[[f64; N]; N]; 2],
}

impl Jet {
    pub fn zero() -> Self {
        Self {
            c: [[[0.0; N]; N]; 2],
        }
    }

    pub fn constant(v: f64) -> Self {
        let mut j = Self::zero();
        j.c[0][0][0] = v;
        j
    }

    /// `v0 + v1 (p - p0)`.
    pub fn affine_p(v0: f64, v1: f64) -> Self {
        let mut j = Self::constant(v0);
        j.c[1][0][0] = v1;
        j
    }

    /// `v0 + (x - x0)`.
    pub fn var_x(v0: f64) -> Self {
        let mut j = Self::constant(v0);
        j.c[0][1][0] = 1.0;
        j
    }

    /// `v0 + (y - y0)`.
    pub fn var_y(v0: f64) -> Self {
        let mut j = Self::constant(v0);
        j.c[0][0][1] = 1.0;
        j
    }

    /// Value at the expansion point.
    pub fn value(&self) -> f64 {
        self.c[0][0][0]
    }

    pub fn dx(&self) -> Self {
        let mut r = Self::zero();
        for e in 0..2 {
            for i in 0..DEG {
                for j in 0..(DEG - i) {
                    r.c[e][i][j] = (i + 1) as f64 * self.c[e][i + 1][j];
                }
            }
        }
        r
    }

    pub fn dy(&self) -> Self {
        let mut r = Self::zero();
        for e in 0..2 {
            for i in 0..DEG {
                for j in 0..(DEG - i) {
                    r.c[e][i][j] = (j + 1) as f64 * self.c[e][i][j + 1];
                }
            }
        }
        r
    }

    /// Partial derivative in `p`. The result carries no `p` dependence.
    pub fn dp(&self) -> Self {
        let mut r = Self::zero();
        r.c[0] = self.c[1];
        r
    }

    /// Discards the `p` dependence.
    pub fn drop_p(&self) -> Self {
        let mut r = *self;
        r.c[1] = [[0.0; N]; N];
        r
    }

    /// `g(self)` given `tower[k] = g^(k)(self.value())`.
    pub fn compose(&self, tower: &[f64]) -> Self {
        assert!(tower.len() > DEG + 1, "tower too short");
        let n = *self - Self::constant(self.value());
        // Horner on sum_k tower[k] / k! n^k; n is nilpotent of order DEG + 2.
        let mut fact = [1.0; DEG + 2];
        for k in 1..DEG + 2 {
            fact[k] = fact[k - 1] * k as f64;
        }
        let mut acc = Self::constant(tower[DEG + 1] / fact[DEG + 1]);
        for k in (0..=DEG).rev() {
            acc = acc * n + Self::constant(tower[k] / fact[k]);
        }
        acc
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let mut t = vec![0.0; DEG + 2];
        let mut d = 1.0 / a;
        for (k, tk) in t.iter_mut().enumerate() {
            *tk = d;
            d *= -((k + 1) as f64) / a;
        }
        self.compose(&t)
    }

    pub fn sqrt(&self) -> Self {
        let a = self.value();
        let mut t = vec![0.0; DEG + 2];
        let mut coef = 1.0;
        for (k, tk) in t.iter_mut().enumerate() {
            *tk = coef * a.powf(0.5 - k as f64);
            coef *= 0.5 - k as f64;
        }
        self.compose(&t)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for e in 0..2 {
            for i in 0..N {
                for j in 0..N - i {
                    self.c[e][i][j] += o.c[e][i][j];
                }
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, s: f64) -> Jet {
        for e in 0..2 {
            for i in 0..N {
                for j in 0..N - i {
                    self.c[e][i][j] *= s;
                }
            }
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut r = Jet::zero();
        for e1 in 0..2 {
            for i1 in 0..N {
                for j1 in 0..N - i1 {
                    let a = self.c[e1][i1][j1];
                    if a == 0.0 {
                        continue;
                    }
                    for e2 in 0..2 - e1 {
                        for i2 in 0..N - i1 - j1 {
                            for j2 in 0..N - i1 - j1 - i2 {
                                r.c[e1 + e2][i1 + i2][j1 + j2] += a * o.c[e2][i2][j2];
                            }
                        }
                    }
                }
            }
        }
        r
    }
}
