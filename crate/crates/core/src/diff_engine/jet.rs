//! Second-order coordinate jets.
//!
//! A [`Jet2`] carries the value of a scalar field together with its first
//! derivatives `∂/∂x_i` and the diagonal second derivatives `∂²/∂x_i²`.
//! That is exactly what the elliptic operators need (`∇u`, `Δu`, `∇·λ`);
//! mixed partials are never stored.

use std::ops::{Add, Mul, Neg, Sub};

use super::Scalar;
use crate::error::{arg_err, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T = f64> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess_diag: Vec<T>,
}

impl Jet2<f64> {
    /// A field independent of `x` in `d` dimensions.
    pub fn constant(d: usize, value: f64) -> Self {
        Self {
            value,
            grad: vec![0.0; d],
            hess_diag: vec![0.0; d],
        }
    }

    /// The coordinate function `x ↦ x_i` seeded at `x`.
    pub fn lift(x: &[f64], i: usize) -> Result<Self> {
        if i >= x.len() {
            return arg_err(format!("coordinate index {i} out of range for dimension {}", x.len()));
        }
        let mut jet = Self::constant(x.len(), x[i]);
        jet.grad[i] = 1.0;
        Ok(jet)
    }

    /// All coordinate jets of a point.
    pub fn lift_all(x: &[f64]) -> Vec<Self> {
        (0..x.len())
            .map(|i| Self::lift(x, i).expect("index in range"))
            .collect()
    }
}

/// Free-function alias for [`Jet2::lift`].
pub fn jet_lift_input(x: &[f64], i: usize) -> Result<Jet2<f64>> {
    Jet2::lift(x, i)
}

impl<T: Scalar> Jet2<T> {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn laplacian(&self) -> T {
        sum(self.value, &self.hess_diag)
    }

    pub fn constant_like(&self, c: f64) -> Self {
        let z = self.value.zero_like();
        Self {
            value: self.value.constant_like(c),
            grad: vec![z; self.dim()],
            hess_diag: vec![z; self.dim()],
        }
    }

    /// Applies a univariate function given its value and first two derivatives
    /// at `self.value`.
    pub fn chain(&self, f: T, df: T, d2f: T) -> Self {
        let grad = self.grad.iter().map(|&g| df * g).collect();
        let hess_diag = self
            .hess_diag
            .iter()
            .zip(&self.grad)
            .map(|(&h, &g)| df * h + d2f * g * g)
            .collect();
        Self {
            value: f,
            grad,
            hess_diag,
        }
    }

    pub fn tanh(&self) -> Self {
        let t = self.value.tanh();
        let s = (t * t).rsub(1.0);
        self.chain(t, s, t * s * -2.0)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        let d1 = s.constant_like(0.5) / s;
        let d2 = d1 / self.value * -0.5;
        self.chain(s, d1, d2)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let inv = self.value.constant_like(1.0) / self.value;
        self.chain(self.value.ln(), inv, -(inv * inv))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }

    /// `self^p` for a positive base.
    pub fn powf(&self, p: f64) -> Self {
        let v = self.value;
        self.chain(v.powf(p), v.powf(p - 1.0) * p, v.powf(p - 2.0) * (p * (p - 1.0)))
    }

    /// `|self|`, differentiated as `sgn(value)·self` (zero derivatives at 0).
    pub fn abs(&self) -> Self {
        let v = self.value.value();
        if v > 0.0 {
            self.clone()
        } else if v < 0.0 {
            -self
        } else {
            let z = self.value.zero_like();
            self.chain(z, z, z)
        }
    }

    pub fn recip(&self) -> Self {
        let inv = self.value.constant_like(1.0) / self.value;
        self.chain(inv, -(inv * inv), inv * inv * inv * 2.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        Self {
            value: self.value + c,
            grad: self.grad.clone(),
            hess_diag: self.hess_diag.clone(),
        }
    }

    fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            value: f(self.value),
            grad: self.grad.iter().map(|&g| f(g)).collect(),
            hess_diag: self.hess_diag.iter().map(|&h| f(h)).collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.dim(), other.dim(), "jet dimension mismatch");
        Self {
            value: f(self.value, other.value),
            grad: self.grad.iter().zip(&other.grad).map(|(&a, &b)| f(a, b)).collect(),
            hess_diag: self
                .hess_diag
                .iter()
                .zip(&other.hess_diag)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Product rule; panics on a dimension mismatch (see [`jet_product`]).
    pub fn mul_jet(&self, b: &Self) -> Self {
        assert_eq!(self.dim(), b.dim(), "jet dimension mismatch");
        let (av, bv) = (self.value, b.value);
        let grad = self
            .grad
            .iter()
            .zip(&b.grad)
            .map(|(&ag, &bg)| ag * bv + av * bg)
            .collect();
        let hess_diag = (0..self.dim())
            .map(|i| {
                self.hess_diag[i] * bv + self.grad[i] * b.grad[i] * 2.0 + av * b.hess_diag[i]
            })
            .collect();
        Self {
            value: av * bv,
            grad,
            hess_diag,
        }
    }

    pub fn div_jet(&self, b: &Self) -> Self {
        self.mul_jet(&b.recip())
    }

    /// Product with a parameter-free jet.
    pub fn mul_const_jet(&self, b: &Jet2<f64>) -> Self {
        assert_eq!(self.dim(), b.dim(), "jet dimension mismatch");
        let (av, bv) = (self.value, b.value);
        let grad = self
            .grad
            .iter()
            .zip(&b.grad)
            .map(|(&ag, &bg)| ag * bv + av * bg)
            .collect();
        let hess_diag = (0..self.dim())
            .map(|i| self.hess_diag[i] * bv + self.grad[i] * (2.0 * b.grad[i]) + av * b.hess_diag[i])
            .collect();
        Self {
            value: av * bv,
            grad,
            hess_diag,
        }
    }

    /// Sum with a parameter-free jet.
    pub fn add_const_jet(&self, b: &Jet2<f64>) -> Self {
        assert_eq!(self.dim(), b.dim(), "jet dimension mismatch");
        Self {
            value: self.value + b.value,
            grad: self.grad.iter().zip(&b.grad).map(|(&a, &c)| a + c).collect(),
            hess_diag: self
                .hess_diag
                .iter()
                .zip(&b.hess_diag)
                .map(|(&a, &c)| a + c)
                .collect(),
        }
    }
}

fn sum<T: Scalar>(like: T, xs: &[T]) -> T {
    match xs.split_first() {
        None => like.zero_like(),
        Some((&first, rest)) => rest.iter().fold(first, |acc, &x| acc + x),
    }
}

impl<T: Scalar> Add for &Jet2<T> {
    type Output = Jet2<T>;
    fn add(self, rhs: &Jet2<T>) -> Jet2<T> {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for &Jet2<T> {
    type Output = Jet2<T>;
    fn sub(self, rhs: &Jet2<T>) -> Jet2<T> {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<T: Scalar> Mul for &Jet2<T> {
    type Output = Jet2<T>;
    fn mul(self, rhs: &Jet2<T>) -> Jet2<T> {
        self.mul_jet(rhs)
    }
}

impl<T: Scalar> Neg for &Jet2<T> {
    type Output = Jet2<T>;
    fn neg(self) -> Jet2<T> {
        self.map(|v| -v)
    }
}

pub fn jet_tanh<T: Scalar>(a: &Jet2<T>) -> Jet2<T> {
    a.tanh()
}

/// Dense pre-activation `Σ w_k a_k + bias`.
pub fn jet_affine<T: Scalar>(inputs: &[Jet2<T>], weights: &[f64], bias: f64) -> Result<Jet2<T>> {
    if inputs.len() != weights.len() {
        return arg_err(format!(
            "affine: {} inputs but {} weights",
            inputs.len(),
            weights.len()
        ));
    }
    let Some(first) = inputs.first() else {
        return arg_err("affine: no inputs");
    };
    let d = first.dim();
    if inputs.iter().any(|j| j.dim() != d) {
        return arg_err("affine: inputs have different dimensions");
    }
    let mut out = first.scale(weights[0]);
    for (jet, &w) in inputs.iter().zip(weights).skip(1) {
        out.value = out.value + jet.value * w;
        for i in 0..d {
            out.grad[i] = out.grad[i] + jet.grad[i] * w;
            out.hess_diag[i] = out.hess_diag[i] + jet.hess_diag[i] * w;
        }
    }
    out.value = out.value + bias;
    Ok(out)
}

pub fn jet_product<T: Scalar>(a: &Jet2<T>, b: &Jet2<T>) -> Result<Jet2<T>> {
    if a.dim() != b.dim() {
        return arg_err(format!("product: dimensions {} and {}", a.dim(), b.dim()));
    }
    Ok(a.mul_jet(b))
}
