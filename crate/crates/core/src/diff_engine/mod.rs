//! Exact input and parameter derivatives.
//!
//! Input derivatives (`∇`, diagonal of the Hessian) are propagated forward as
//! [`Jet2`] values. Parameter derivatives come from a reverse sweep over a
//! record of that same jet arithmetic: the scalar [`Tape`] holds the
//! pointwise loss expressions, and [`batch`] holds the dense-layer kernels
//! and their adjoints.

pub mod batch;
mod jet;
mod scalar;
mod tape;

pub use jet::{jet_affine, jet_lift_input, jet_product, jet_tanh, Jet2};
pub use scalar::Scalar;
pub use tape::{Adjoints, Node, OpKind, Tape, Var};

/// Gradient with respect to every trainable parameter, in the network's
/// canonical order (layer by layer, weights row-major, then biases).
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrad(Vec<f64>);

impl ParamGrad {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &ParamGrad) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

impl From<Vec<f64>> for ParamGrad {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
