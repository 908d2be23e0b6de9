//! Scalar reverse-mode tape.
//!
//! Every arithmetic operation on a [`Var`] appends one [`Node`] holding the
//! operand indices and the local partial derivatives evaluated during the
//! forward pass. A reverse sweep then accumulates adjoints in a single pass
//! from the seeded output back to the leaves.
//!
//! ```
//! use prox_evi::diff_engine::Tape;
//!
//! let tape = Tape::new();
//! let theta = tape.leaf(3.0);
//! let loss = theta * theta;
//! let grad = tape.backward(loss).unwrap().param_grad(&[theta]);
//! assert_eq!(grad.as_slice(), &[6.0]);
//! ```

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{ParamGrad, Scalar};
use crate::error::{state_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddConst,
    MulConst,
    Tanh,
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Powf,
    Abs,
    Relu,
}

/// One primitive record. Unused operand slots have a zero partial.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub kind: OpKind,
    pub args: [usize; 2],
    pub arity: u8,
    pub partials: [f64; 2],
    pub value: f64,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Drops all nodes but keeps the allocation.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
    }

    pub fn node(&self, index: usize) -> Option<Node> {
        self.nodes.borrow().get(index).copied()
    }

    /// A differentiable input.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        self.push(OpKind::Leaf, [0, 0], 0, [0.0, 0.0], value)
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(OpKind::Const, [0, 0], 0, [0.0, 0.0], value)
    }

    fn push(&self, kind: OpKind, args: [usize; 2], arity: u8, partials: [f64; 2], value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        nodes.push(Node {
            kind,
            args,
            arity,
            partials,
            value,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    fn unary(&self, kind: OpKind, a: Var<'_>, partial: f64, value: f64) -> Var<'_> {
        self.push(kind, [a.index, 0], 1, [partial, 0.0], value)
    }

    fn binary(&self, kind: OpKind, a: Var<'_>, b: Var<'_>, pa: f64, pb: f64, value: f64) -> Var<'_> {
        debug_assert!(std::ptr::eq(a.tape, b.tape), "vars from different tapes");
        self.push(kind, [a.index, b.index], 2, [pa, pb], value)
    }

    /// Every operand index strictly precedes its consumer.
    pub fn is_topologically_ordered(&self) -> bool {
        self.nodes
            .borrow()
            .iter()
            .enumerate()
            .all(|(i, n)| n.args[..n.arity as usize].iter().all(|&a| a < i))
    }

    /// Reverse sweep seeded at `output`.
    pub fn backward(&self, output: Var<'_>) -> Result<Adjoints> {
        let nodes = self.nodes.borrow();
        if nodes.is_empty() {
            return state_err("backward called on an empty tape");
        }
        if output.index >= nodes.len() {
            return state_err(format!("output node {} does not exist", output.index));
        }
        let mut adjoints = vec![0.0; output.index + 1];
        adjoints[output.index] = 1.0;
        for i in (0..=output.index).rev() {
            let adj = adjoints[i];
            if adj == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for k in 0..node.arity as usize {
                adjoints[node.args[k]] += node.partials[k] * adj;
            }
        }
        Ok(Adjoints(adjoints))
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

/// Adjoints of every node up to the seeded output.
#[derive(Clone, Debug)]
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    /// Adjoint of a node; nodes recorded after the output have none.
    pub fn get(&self, var: Var<'_>) -> f64 {
        self.at(var.index)
    }

    pub fn at(&self, index: usize) -> f64 {
        self.0.get(index).copied().unwrap_or(0.0)
    }

    pub fn param_grad(&self, params: &[Var<'_>]) -> ParamGrad {
        ParamGrad::from(params.iter().map(|&p| self.get(p)).collect::<Vec<_>>())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl<'t> Var<'t> {
    pub fn index(self) -> usize {
        self.index
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.index, self.value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(OpKind::Add, self, rhs, 1.0, 1.0, self.value + rhs.value)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(OpKind::Sub, self, rhs, 1.0, -1.0, self.value - rhs.value)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.binary(OpKind::Mul, self, rhs, rhs.value, self.value, self.value * rhs.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.value / rhs.value;
        self.tape.binary(OpKind::Div, self, rhs, 1.0 / rhs.value, -q / rhs.value, q)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.unary(OpKind::Neg, self, -1.0, -self.value)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape.unary(OpKind::AddConst, self, 1.0, self.value + rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.tape.unary(OpKind::AddConst, self, 1.0, self.value - rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.tape.unary(OpKind::MulConst, self, rhs, self.value * rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.tape.unary(OpKind::MulConst, self, 1.0 / rhs, self.value / rhs)
    }
}

impl Scalar for Var<'_> {
    fn value(self) -> f64 {
        self.value
    }

    fn constant_like(self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.tape.unary(OpKind::Tanh, self, 1.0 - t * t, t)
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.tape.unary(OpKind::Sqrt, self, 0.5 / s, s)
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.tape.unary(OpKind::Exp, self, e, e)
    }

    fn ln(self) -> Self {
        self.tape.unary(OpKind::Ln, self, 1.0 / self.value, self.value.ln())
    }

    fn sin(self) -> Self {
        self.tape.unary(OpKind::Sin, self, self.value.cos(), self.value.sin())
    }

    fn cos(self) -> Self {
        self.tape.unary(OpKind::Cos, self, -self.value.sin(), self.value.cos())
    }

    fn powf(self, p: f64) -> Self {
        self.tape
            .unary(OpKind::Powf, self, p * self.value.powf(p - 1.0), self.value.powf(p))
    }

    fn abs(self) -> Self {
        let sign = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.tape.unary(OpKind::Abs, self, sign, self.value.abs())
    }

    fn relu(self) -> Self {
        if self.value > 0.0 {
            self.tape.unary(OpKind::Relu, self, 1.0, self.value)
        } else {
            self.tape.unary(OpKind::Relu, self, 0.0, 0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let theta = tape.leaf(3.0);
        let loss = theta * theta;
        let adj = tape.backward(loss).unwrap();
        assert_eq!(adj.get(theta), 6.0);
        assert_eq!(adj.get(loss), 1.0);
    }

    #[test]
    fn dead_input_has_zero_gradient() {
        let tape = Tape::new();
        let a = tape.leaf(2.0);
        let b = tape.leaf(5.0);
        let loss = a.tanh() * 4.0;
        let g = tape.backward(loss).unwrap().param_grad(&[a, b]);
        assert_eq!(g.as_slice()[1], 0.0);
        assert!((g.as_slice()[0] - 4.0 * (1.0 - 2f64.tanh().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn empty_tape_is_a_state_error() {
        let tape = Tape::new();
        let other = Tape::new();
        let v = other.leaf(1.0);
        assert!(matches!(tape.backward(v), Err(crate::EviError::State(_))));
    }

    #[test]
    fn quotient_and_sqrt_rules() {
        let tape = Tape::new();
        let x = tape.leaf(2.0);
        let y = tape.leaf(3.0);
        let f = (x / y).sqrt() + x.exp().ln() * y.sin();
        let g = tape.backward(f).unwrap().param_grad(&[x, y]);
        let fx = |x: f64, y: f64| (x / y).sqrt() + x * y.sin();
        let h = 1e-6;
        let dx = (fx(2.0 + h, 3.0) - fx(2.0 - h, 3.0)) / (2.0 * h);
        let dy = (fx(2.0, 3.0 + h) - fx(2.0, 3.0 - h)) / (2.0 * h);
        assert!((g.as_slice()[0] - dx).abs() < 1e-8);
        assert!((g.as_slice()[1] - dy).abs() < 1e-8);
        assert!(tape.is_topologically_ordered());
    }

    #[test]
    fn relu_and_abs_subgradients_at_zero() {
        let tape = Tape::new();
        let x = tape.leaf(0.0);
        let f = x.relu() + x.abs();
        assert_eq!(tape.backward(f).unwrap().get(x), 0.0);
    }
}
