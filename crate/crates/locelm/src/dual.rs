//! Scalar second-order dual numbers.
//!
//! [`Dual2`] carries a value together with first and second derivatives with
//! respect to one active variable. Exact solutions are differentiated one
//! axis at a time (only pure second derivatives are ever needed), so a single
//! derivative channel suffices and the arithmetic stays tiny.
//!
//! Used by the benchmark problem constructors to derive boundary/initial data
//! and manufactured forcing from the closed-form solution at machine
//! precision instead of hand-transcribed derivative formulas.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value plus first and second derivative with respect to one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual2 {
    /// Function value.
    pub v: f64,
    /// First derivative.
    pub d: f64,
    /// Second derivative.
    pub dd: f64,
}

impl Dual2 {
    /// The active variable: value `x`, derivative 1.
    pub fn var(x: f64) -> Self {
        Dual2 { v: x, d: 1.0, dd: 0.0 }
    }

    /// A constant: derivative 0.
    pub fn con(c: f64) -> Self {
        Dual2 { v: c, d: 0.0, dd: 0.0 }
    }

    /// Chain rule for a scalar function with known first/second derivative at
    /// `self.v`.
    #[inline]
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Dual2 { v: f, d: df * self.d, dd: ddf * self.d * self.d + df * self.dd }
    }

    /// Sine.
    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    /// Cosine.
    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    /// Hyperbolic tangent.
    pub fn tanh(self) -> Self {
        let t = self.v.tanh();
        let u = 1.0 - t * t;
        self.chain(t, u, -2.0 * t * u)
    }

    /// Hyperbolic secant `1 / cosh`.
    pub fn sech(self) -> Self {
        let s = 1.0 / self.v.cosh();
        let t = self.v.tanh();
        // (sech)' = -sech tanh; (sech)'' = sech (tanh^2 - sech^2) ... via
        // tanh' = sech^2: d/dx(-s t) = -s' t - s t' = s t^2 - s^3.
        self.chain(s, -s * t, s * t * t - s * s * s)
    }

    /// Exponential.
    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    /// Integer power.
    pub fn powi(self, n: i32) -> Self {
        let f = self.v.powi(n);
        let df = n as f64 * self.v.powi(n - 1);
        let ddf = (n * (n - 1)) as f64 * self.v.powi(n - 2);
        self.chain(f, df, ddf)
    }

    /// Euclidean remainder with period `p`. Piecewise a shift by a constant,
    /// so derivatives pass through unchanged (points exactly on a jump take
    /// the right-limit branch).
    pub fn rem_euclid(self, p: f64) -> Self {
        Dual2 { v: self.v.rem_euclid(p), ..self }
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        Dual2 { v: self.v + o.v, d: self.d + o.d, dd: self.dd + o.dd }
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        Dual2 { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        Dual2 {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}

impl Div for Dual2 {
    type Output = Dual2;
    fn div(self, o: Dual2) -> Dual2 {
        // From a = q b: q' = (a' - q b') / b, q'' = (a'' - 2 q' b' - q b'') / b.
        let v = self.v / o.v;
        let d = (self.d - v * o.d) / o.v;
        let dd = (self.dd - 2.0 * d * o.d - v * o.dd) / o.v;
        Dual2 { v, d, dd }
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        Dual2 { v: -self.v, d: -self.d, dd: -self.dd }
    }
}

impl Add<f64> for Dual2 {
    type Output = Dual2;
    fn add(self, c: f64) -> Dual2 {
        Dual2 { v: self.v + c, ..self }
    }
}

impl Sub<f64> for Dual2 {
    type Output = Dual2;
    fn sub(self, c: f64) -> Dual2 {
        Dual2 { v: self.v - c, ..self }
    }
}

impl Mul<f64> for Dual2 {
    type Output = Dual2;
    fn mul(self, c: f64) -> Dual2 {
        Dual2 { v: self.v * c, d: self.d * c, dd: self.dd * c }
    }
}

impl Mul<Dual2> for f64 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        o * self
    }
}

impl Add<Dual2> for f64 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        o + self
    }
}

impl Sub<Dual2> for f64 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        -o + self
    }
}
