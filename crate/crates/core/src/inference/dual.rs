//! Forward-mode dual numbers for the handful of correlation coordinates.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Maximum number of correlation coordinates (4 x 4 correlation matrix).
pub const MAX_CORR: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; MAX_CORR],
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; MAX_CORR] }
    }

    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; MAX_CORR];
        d[i] = 1.0;
        Self { v, d }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = self.d;
        for x in &mut d {
            *x *= dv;
        }
        Self { v, d }
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }

    pub fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }

    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        self.chain(t, 1.0 - t * t)
    }

    /// `ln(1 - tanh(x)^2)`, stable for large `|x|`.
    pub fn ln_sech2(self) -> Self {
        let a = self.v.abs();
        let v = 2.0 * (std::f64::consts::LN_2 - a - (-2.0 * a).exp().ln_1p());
        self.chain(v, -2.0 * self.v.tanh())
    }

    /// `1 - self`, floored at a tiny positive value so logs stay finite.
    pub fn one_minus_floored(self) -> Self {
        let v = 1.0 - self.v;
        if v > f64::MIN_POSITIVE {
            -self + 1.0
        } else {
            Dual::constant(f64::MIN_POSITIVE)
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, o: Dual) -> Dual {
        self.v += o.v;
        for (a, b) in self.d.iter_mut().zip(o.d) {
            *a += b;
        }
        self
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    fn add(mut self, o: f64) -> Dual {
        self.v += o;
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        self + (-o)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.chain(-self.v, -1.0)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let mut d = [0.0; MAX_CORR];
        for (i, x) in d.iter_mut().enumerate() {
            *x = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, o: f64) -> Dual {
        self.chain(self.v * o, o)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let inv = 1.0 / o.v;
        let mut d = [0.0; MAX_CORR];
        for (i, x) in d.iter_mut().enumerate() {
            *x = (self.d[i] - self.v * inv * o.d[i]) * inv;
        }
        Dual { v: self.v * inv, d }
    }
}
