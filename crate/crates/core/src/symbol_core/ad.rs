//! Second-order forward-mode differentiation over real variables with complex values.
//! Catalog symbols are written once against [`Scalar`] and evaluated either plainly or
//! with exact first and second derivatives.

use crate::numerics::C64;
use std::ops::{Add, Mul, Neg, Sub};

pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// A constant carrying the derivative layout of `self`.
    fn constant_like(&self, c: C64) -> Self;

    fn real_like(&self, r: f64) -> Self {
        self.constant_like(C64::new(r, 0.0))
    }

    fn scale(&self, c: C64) -> Self {
        self.clone() * self.constant_like(c)
    }

    fn scale_re(&self, r: f64) -> Self {
        self.scale(C64::new(r, 0.0))
    }

    fn powi(&self, k: u32) -> Self {
        let mut acc = self.real_like(1.0);
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }
}

impl Scalar for C64 {
    fn constant_like(&self, c: C64) -> Self {
        c
    }
}

/// Value, gradient and Hessian with respect to `dim` real variables.
#[derive(Clone, Debug)]
pub struct Dual2 {
    pub v: C64,
    pub g: Vec<C64>,
    pub h: Vec<C64>,
}

impl Dual2 {
    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn constant(dim: usize, c: C64) -> Self {
        Self {
            v: c,
            g: vec![C64::default(); dim],
            h: vec![C64::default(); dim * dim],
        }
    }

    /// The `i`-th coordinate function with value `x`.
    pub fn variable(dim: usize, i: usize, x: f64) -> Self {
        let mut d = Self::constant(dim, C64::new(x, 0.0));
        d.g[i] = C64::new(1.0, 0.0);
        d
    }

    pub fn seed(w: &[f64]) -> Vec<Self> {
        (0..w.len())
            .map(|i| Self::variable(w.len(), i, w[i]))
            .collect()
    }
}

impl Add for Dual2 {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        self.g.iter_mut().zip(&o.g).for_each(|(a, b)| *a += b);
        self.h.iter_mut().zip(&o.h).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Dual2 {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self.v -= o.v;
        self.g.iter_mut().zip(&o.g).for_each(|(a, b)| *a -= b);
        self.h.iter_mut().zip(&o.h).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for Dual2 {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.v = -self.v;
        self.g.iter_mut().for_each(|a| *a = -*a);
        self.h.iter_mut().for_each(|a| *a = -*a);
        self
    }
}

impl Mul for Dual2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let d = self.dim();
        let mut h = vec![C64::default(); d * d];
        for i in 0..d {
            for j in 0..d {
                h[i * d + j] = self.h[i * d + j] * o.v
                    + o.h[i * d + j] * self.v
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
            }
        }
        let g = (0..d).map(|i| self.g[i] * o.v + o.g[i] * self.v).collect();
        Self {
            v: self.v * o.v,
            g,
            h,
        }
    }
}

impl Scalar for Dual2 {
    fn constant_like(&self, c: C64) -> Self {
        Self::constant(self.dim(), c)
    }

    fn scale(&self, c: C64) -> Self {
        Self {
            v: self.v * c,
            g: self.g.iter().map(|a| a * c).collect(),
            h: self.h.iter().map(|a| a * c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_second_order() {
        // f(x, y) = x^2 y at (2, 3)
        let w = Dual2::seed(&[2.0, 3.0]);
        let f = w[0].clone() * w[0].clone() * w[1].clone();
        assert_eq!(f.v.re, 12.0);
        assert_eq!(f.g[0].re, 12.0);
        assert_eq!(f.g[1].re, 4.0);
        assert_eq!(f.h[0].re, 6.0);
        assert_eq!(f.h[1].re, 4.0);
        assert_eq!(f.h[2].re, 4.0);
        assert_eq!(f.h[3].re, 0.0);
    }
}
