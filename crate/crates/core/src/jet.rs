//! Truncated Taylor series ("jets") for exact higher derivatives of the
//! closed-form model ingredients.
//!
//! A jet of order `k` stores `f(x0), f'(x0)/1!, ..., f^(k)(x0)/k!`. Arithmetic
//! on jets propagates the chain rule exactly, so derivatives of compositions
//! such as `D(L(h))` come out without finite differencing.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    /// The identity function expanded at `x0`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut jet = Self::constant(x0, order);
        if order >= 1 {
            jet.coeffs[1] = 1.0;
        }
        jet
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The `k`-th derivative, `k! * c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut factorial = 1.0;
        for i in 2..=k {
            factorial *= i as f64;
        }
        self.coeffs[k] * factorial
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|k| self.derivative(k)).collect()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_scalar(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    pub fn recip(&self) -> Self {
        let n = self.coeffs.len();
        let f = &self.coeffs;
        let mut r = vec![0.0; n];
        r[0] = 1.0 / f[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| f[j] * r[k - j]).sum();
            r[k] = -s * r[0];
        }
        Self { coeffs: r }
    }

    pub fn exp(&self) -> Self {
        let n = self.coeffs.len();
        let g = &self.coeffs;
        let mut e = vec![0.0; n];
        e[0] = g[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|j| j as f64 * g[j] * e[k - j]).sum();
            e[k] = s / k as f64;
        }
        Self { coeffs: e }
    }

    /// Returns `(sin f, cos f)`.
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.coeffs.len();
        let g = &self.coeffs;
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = g[0].sin();
        c[0] = g[0].cos();
        for k in 1..n {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 1..=k {
                ds += j as f64 * g[j] * c[k - j];
                dc -= j as f64 * g[j] * s[k - j];
            }
            s[k] = ds / k as f64;
            c[k] = dc / k as f64;
        }
        (Self { coeffs: s }, Self { coeffs: c })
    }

    pub fn div(&self, other: &Jet) -> Self {
        self * &other.recip()
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len().min(rhs.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = (0..=k).map(|j| self.coeffs[j] * rhs.coeffs[k - j]).sum();
        }
        Jet { coeffs: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_square() {
        // d^k/dx^k exp(x^2) at x = 0.3
        let x = Jet::variable(0.3, 4);
        let e = (&x * &x).exp();
        let v = (0.09f64).exp();
        assert_relative_eq!(e.derivative(0), v, max_relative = 1e-14);
        assert_relative_eq!(e.derivative(1), 0.6 * v, max_relative = 1e-14);
        assert_relative_eq!(e.derivative(2), (2.0 + 0.36) * v, max_relative = 1e-14);
        // f''' = (12x + 8x^3) e^{x^2}
        assert_relative_eq!(e.derivative(3), (3.6 + 8.0 * 0.027) * v, max_relative = 1e-13);
    }

    #[test]
    fn sin_cos_and_recip() {
        let x = Jet::variable(0.7, 3);
        let (s, c) = x.sin_cos();
        assert_relative_eq!(s.derivative(3), -(0.7f64).cos(), max_relative = 1e-14);
        assert_relative_eq!(c.derivative(2), -(0.7f64).cos(), max_relative = 1e-14);
        let r = x.add_scalar(1.0).recip();
        // 1/(1+x): third derivative -6/(1+x)^4
        assert_relative_eq!(r.derivative(3), -6.0 / 1.7f64.powi(4), max_relative = 1e-13);
    }
}
