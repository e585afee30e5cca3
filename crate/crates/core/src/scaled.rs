//! Complex numbers carried as `mant * exp(exp)` so that evanescent
//! solutions can be combined without overflow.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mant: Complex64,
    pub exp: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mant: Complex64 { re: 0.0, im: 0.0 }, exp: 0.0 };

    pub fn new(mant: Complex64, exp: f64) -> Self {
        Scaled { mant, exp }.normalized()
    }

    pub fn from_complex(z: Complex64) -> Self {
        Scaled::new(z, 0.0)
    }

    pub fn from_real(x: f64) -> Self {
        Scaled::new(Complex64::new(x, 0.0), 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.re == 0.0 && self.mant.im == 0.0
    }

    /// Keeps `|mant|` in [0.5, 2) so exponents carry all of the magnitude.
    pub fn normalized(self) -> Self {
        let a = self.mant.norm();
        if a == 0.0 || !a.is_finite() {
            return if a == 0.0 { Scaled::ZERO } else { self };
        }
        if (0.5..2.0).contains(&a) {
            return self;
        }
        let l = a.ln();
        Scaled { mant: self.mant / a, exp: self.exp + l }
    }

    /// Natural log of the modulus (`-inf` for zero).
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mant.norm().ln() + self.exp
        }
    }

    pub fn abs(&self) -> f64 {
        self.ln_abs().exp()
    }

    /// Plain value; overflows to infinity or underflows to zero silently.
    pub fn value(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.mant * self.exp.exp()
    }

    /// Value multiplied by `exp(-shift)`; used to bring a set of numbers to a common scale.
    pub fn value_shifted(&self, shift: f64) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.mant * (self.exp - shift).exp()
    }

    pub fn scale(self, c: Complex64) -> Self {
        Scaled::new(self.mant * c, self.exp)
    }

    pub fn conj(self) -> Self {
        Scaled { mant: self.mant.conj(), exp: self.exp }
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, o: Scaled) -> Scaled {
        Scaled::new(self.mant * o.mant, self.exp + o.exp)
    }
}

impl Div for Scaled {
    type Output = Scaled;
    fn div(self, o: Scaled) -> Scaled {
        Scaled::new(self.mant / o.mant, self.exp - o.exp)
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, o: Scaled) -> Scaled {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        if self.exp >= o.exp {
            Scaled::new(self.mant + o.mant * (o.exp - self.exp).exp(), self.exp)
        } else {
            Scaled::new(o.mant + self.mant * (self.exp - o.exp).exp(), o.exp)
        }
    }
}

impl Sub for Scaled {
    type Output = Scaled;
    fn sub(self, o: Scaled) -> Scaled {
        self + (-o)
    }
}

impl Neg for Scaled {
    type Output = Scaled;
    fn neg(self) -> Scaled {
        Scaled { mant: -self.mant, exp: self.exp }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_matches_plain_complex() {
        let a = Complex64::new(1.5, -2.0);
        let b = Complex64::new(-0.25, 3.0);
        let sa = Scaled::from_complex(a);
        let sb = Scaled::from_complex(b);
        assert!(((sa + sb).value() - (a + b)).norm() < 1e-14);
        assert!(((sa - sb).value() - (a - b)).norm() < 1e-14);
        assert!(((sa * sb).value() - (a * b)).norm() < 1e-13);
        assert!(((sa / sb).value() - (a / b)).norm() < 1e-14);
    }

    #[test]
    fn huge_exponents_survive() {
        let big = Scaled::new(Complex64::new(1.0, 0.0), 2000.0);
        let small = Scaled::new(Complex64::new(3.0, 0.0), -1990.0);
        let p = big * small;
        assert!((p.ln_abs() - (10.0 + 3f64.ln())).abs() < 1e-12);
        assert!(big.value().re.is_infinite());
    }
}
