//! Forward-mode differentiation over complex arithmetic.
//!
//! The moment map depends on both `a` and `conj(a)`, so tangents are taken
//! along real directions (`Re a_j`, `Im a_j`, `r`, ...). A tangent is a
//! complex number: the derivative of the complex-valued quantity along one
//! real coordinate. Conjugation therefore conjugates value and tangent alike.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

/// Arithmetic shared by plain complex evaluation and differentiated evaluation.
pub(crate) trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn constant(c: Complex64) -> Self;
    fn conj(&self) -> Self;
    fn recip(&self) -> Self;

    fn real(x: f64) -> Self {
        Self::constant(Complex64::new(x, 0.0))
    }

    fn zero() -> Self {
        Self::real(0.0)
    }

    fn scale(&self, x: f64) -> Self {
        self.clone() * Self::real(x)
    }
}

impl Scalar for Complex64 {
    fn constant(c: Complex64) -> Self {
        c
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn recip(&self) -> Self {
        Complex64::new(1.0, 0.0) / self
    }
    fn scale(&self, x: f64) -> Self {
        self * x
    }
}

/// A value with tangents along an arbitrary number of real directions.
/// Missing trailing tangent entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dual {
    pub v: Complex64,
    pub d: Vec<Complex64>,
}

impl Dual {
    pub fn real_value(x: f64) -> Self {
        Dual {
            v: Complex64::new(x, 0.0),
            d: Vec::new(),
        }
    }

    /// The `index`-th independent real variable out of `dim`.
    pub fn variable(x: f64, index: usize, dim: usize) -> Self {
        let mut d = vec![Complex64::new(0.0, 0.0); dim];
        d[index] = Complex64::new(1.0, 0.0);
        Dual {
            v: Complex64::new(x, 0.0),
            d,
        }
    }

    /// `re + i im` where both parts are independent variables.
    #[cfg(test)]
    pub fn complex_variable(re: f64, im: f64, re_index: usize, dim: usize) -> Self {
        let mut d = vec![Complex64::new(0.0, 0.0); dim];
        d[re_index] = Complex64::new(1.0, 0.0);
        d[re_index + 1] = Complex64::new(0.0, 1.0);
        Dual {
            v: Complex64::new(re, im),
            d,
        }
    }

    pub fn re(&self) -> Dual {
        Dual {
            v: Complex64::new(self.v.re, 0.0),
            d: self.d.iter().map(|t| Complex64::new(t.re, 0.0)).collect(),
        }
    }

    pub fn im(&self) -> Dual {
        Dual {
            v: Complex64::new(self.v.im, 0.0),
            d: self.d.iter().map(|t| Complex64::new(t.im, 0.0)).collect(),
        }
    }

    pub fn sqrt(&self) -> Dual {
        let s = self.v.sqrt();
        let f = 0.5 / s;
        Dual {
            v: s,
            d: self.d.iter().map(|t| t * f).collect(),
        }
    }

    fn zip(a: &[Complex64], b: &[Complex64], f: impl Fn(Complex64, Complex64) -> Complex64) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| f(*a.get(i).unwrap_or(&zero), *b.get(i).unwrap_or(&zero)))
            .collect()
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: Dual::zip(&self.d, &o.d, |x, y| x + y),
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: Dual::zip(&self.d, &o.d, |x, y| x - y),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    // product rule
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, o: Dual) -> Dual {
        let (a, b) = (self.v, o.v);
        Dual {
            v: a * b,
            d: Dual::zip(&self.d, &o.d, |x, y| x * b + a * y),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: self.d.into_iter().map(|t| -t).collect(),
        }
    }
}

impl Scalar for Dual {
    fn constant(c: Complex64) -> Self {
        Dual { v: c, d: Vec::new() }
    }
    fn conj(&self) -> Self {
        Dual {
            v: self.v.conj(),
            d: self.d.iter().map(|t| t.conj()).collect(),
        }
    }
    fn recip(&self) -> Self {
        let inv = Complex64::new(1.0, 0.0) / self.v;
        let f = -inv * inv;
        Dual {
            v: inv,
            d: self.d.iter().map(|t| t * f).collect(),
        }
    }
    fn scale(&self, x: f64) -> Self {
        Dual {
            v: self.v * x,
            d: self.d.iter().map(|t| t * x).collect(),
        }
    }
}
