//! Batched jet propagation through dense tanh layers.
//!
//! Evaluating a network jet point by point on the scalar tape would record
//! one node per multiply-add. Instead, a batch of jets is stored as a matrix
//! with one row per unit and one column per (component, point) pair, so the
//! dense layer becomes a single matrix product. Each layer call is one
//! coarse tape record with a hand-written adjoint; the adjoints agree with
//! the scalar jet rules in [`super::jet`] and are checked against finite
//! differences in the integration tests.
//!
//! Column layout for `B` points in `d` dimensions: component `c` of point `p`
//! lives in column `c * B + p`, where component 0 is the value, components
//! `1..=d` the gradient entries and `d+1..=2d` the Hessian diagonal.

/// Row-major matrix of jet components.
#[derive(Clone, Debug, PartialEq)]
pub struct JetBatch {
    pub rows: usize,
    pub batch: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl JetBatch {
    pub fn zeros(rows: usize, batch: usize, dim: usize) -> Self {
        Self {
            rows,
            batch,
            dim,
            data: vec![0.0; rows * batch * (1 + 2 * dim)],
        }
    }

    pub fn components(&self) -> usize {
        1 + 2 * self.dim
    }

    pub fn cols(&self) -> usize {
        self.batch * self.components()
    }

    #[inline]
    pub fn col(&self, component: usize, point: usize) -> usize {
        component * self.batch + point
    }

    #[inline]
    pub fn get(&self, row: usize, component: usize, point: usize) -> f64 {
        self.data[row * self.cols() + self.col(component, point)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, component: usize, point: usize, v: f64) {
        let idx = row * self.cols() + self.col(component, point);
        self.data[idx] = v;
    }

    /// Coordinate jets of `batch` points stored contiguously (`coords[p*dim + i]`).
    /// With `track_derivatives = false` only values are carried.
    pub fn from_points(coords: &[f64], dim: usize, track_derivatives: bool) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0);
        let batch = coords.len() / dim;
        let jet_dim = if track_derivatives { dim } else { 0 };
        let mut out = Self::zeros(dim, batch, jet_dim);
        for p in 0..batch {
            for i in 0..dim {
                out.set(i, 0, p, coords[p * dim + i]);
                if track_derivatives {
                    out.set(i, 1 + i, p, 1.0);
                }
            }
        }
        out
    }
}

/// `out = W · input`, with `bias` added to the value columns.
/// `weights` is `rows_out × input.rows`, row-major.
pub fn dense_forward(weights: &[f64], bias: &[f64], input: &JetBatch) -> JetBatch {
    let n_out = bias.len();
    let n_in = input.rows;
    assert_eq!(weights.len(), n_out * n_in);
    let mut out = JetBatch::zeros(n_out, input.batch, input.dim);
    let cols = input.cols();
    // SAFETY: the slices have exactly the extents described by the strides.
    unsafe {
        matrixmultiply::dgemm(
            n_out,
            n_in,
            cols,
            1.0,
            weights.as_ptr(),
            n_in as isize,
            1,
            input.data.as_ptr(),
            cols as isize,
            1,
            0.0,
            out.data.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
    for (r, &b) in bias.iter().enumerate() {
        let row = &mut out.data[r * cols..r * cols + input.batch];
        for v in row {
            *v += b;
        }
    }
    out
}

/// Accumulates the weight and bias adjoints of a dense layer and returns the
/// adjoint of its input.
pub fn dense_backward(
    weights: &[f64],
    input: &JetBatch,
    out_adj: &JetBatch,
    weight_adj: &mut [f64],
    bias_adj: &mut [f64],
) -> JetBatch {
    let n_out = out_adj.rows;
    let n_in = input.rows;
    let cols = input.cols();
    assert_eq!(out_adj.cols(), cols);
    assert_eq!(weight_adj.len(), n_out * n_in);
    // dW += out_adj · inputᵀ
    unsafe {
        matrixmultiply::dgemm(
            n_out,
            cols,
            n_in,
            1.0,
            out_adj.data.as_ptr(),
            cols as isize,
            1,
            input.data.as_ptr(),
            1,
            cols as isize,
            1.0,
            weight_adj.as_mut_ptr(),
            n_in as isize,
            1,
        );
    }
    for (r, b) in bias_adj.iter_mut().enumerate() {
        *b += out_adj.data[r * cols..r * cols + input.batch].iter().sum::<f64>();
    }
    // input_adj = Wᵀ · out_adj
    let mut in_adj = JetBatch::zeros(n_in, input.batch, input.dim);
    unsafe {
        matrixmultiply::dgemm(
            n_in,
            n_out,
            cols,
            1.0,
            weights.as_ptr(),
            1,
            n_in as isize,
            out_adj.data.as_ptr(),
            cols as isize,
            1,
            0.0,
            in_adj.data.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
    in_adj
}

/// Elementwise tanh on jets: `t = tanh(z)`, `g' = (1−t²)g`,
/// `h' = (1−t²)h − 2t(1−t²)g²`.
pub fn tanh_forward(pre: &JetBatch) -> JetBatch {
    let (b, d, cols) = (pre.batch, pre.dim, pre.cols());
    let mut out = JetBatch::zeros(pre.rows, b, d);
    for r in 0..pre.rows {
        let z = &pre.data[r * cols..(r + 1) * cols];
        let a = &mut out.data[r * cols..(r + 1) * cols];
        for p in 0..b {
            let t = z[p].tanh();
            let s = 1.0 - t * t;
            a[p] = t;
            for i in 0..d {
                let g = z[(1 + i) * b + p];
                let h = z[(1 + d + i) * b + p];
                a[(1 + i) * b + p] = s * g;
                a[(1 + d + i) * b + p] = s * h - 2.0 * t * s * g * g;
            }
        }
    }
    out
}

/// Adjoint of [`tanh_forward`] with respect to its pre-activation.
pub fn tanh_backward(pre: &JetBatch, out_adj: &JetBatch) -> JetBatch {
    let (b, d, cols) = (pre.batch, pre.dim, pre.cols());
    let mut in_adj = JetBatch::zeros(pre.rows, b, d);
    for r in 0..pre.rows {
        let z = &pre.data[r * cols..(r + 1) * cols];
        let abar = &out_adj.data[r * cols..(r + 1) * cols];
        let zbar = &mut in_adj.data[r * cols..(r + 1) * cols];
        for p in 0..b {
            let t = z[p].tanh();
            let s = 1.0 - t * t;
            let ts = t * s;
            // d(t·s)/dz = s(1 − 3t²)
            let dts = s * (1.0 - 3.0 * t * t);
            let mut zv = abar[p] * s;
            for i in 0..d {
                let gi = (1 + i) * b + p;
                let hi = (1 + d + i) * b + p;
                let (g, h) = (z[gi], z[hi]);
                let (ag, ah) = (abar[gi], abar[hi]);
                zv += ag * (-2.0 * ts * g) + ah * (-2.0 * ts * h - 2.0 * g * g * dts);
                zbar[gi] = ag * s + ah * (-4.0 * ts * g);
                zbar[hi] = ah * s;
            }
            zbar[p] = zv;
        }
    }
    in_adj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff_engine::{jet_affine, jet_tanh, Jet2};

    #[test]
    fn dense_then_tanh_matches_pointwise_jets() {
        let coords = [0.3, -0.2, 0.9, 0.4];
        let w = [0.5, -1.2, 0.7, 0.1, -0.3, 0.8];
        let bias = [0.05, -0.1, 0.2];
        let x = JetBatch::from_points(&coords, 2, true);
        let a = tanh_forward(&dense_forward(&w, &bias, &x));
        for p in 0..2 {
            let inputs = Jet2::lift_all(&coords[2 * p..2 * p + 2]);
            for r in 0..3 {
                let j = jet_tanh(&jet_affine(&inputs, &w[2 * r..2 * r + 2], bias[r]).unwrap());
                assert!((a.get(r, 0, p) - j.value).abs() < 1e-15);
                for i in 0..2 {
                    assert!((a.get(r, 1 + i, p) - j.grad[i]).abs() < 1e-15);
                    assert!((a.get(r, 3 + i, p) - j.hess_diag[i]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn tanh_backward_matches_finite_differences() {
        let mut pre = JetBatch::zeros(1, 1, 2);
        pre.data.copy_from_slice(&[0.4, 0.7, -1.1, 0.3, 0.5]);
        let weights = [0.3, -0.8, 1.3, 0.6, -0.45];
        let f = |z: &JetBatch| -> f64 {
            let a = tanh_forward(z);
            a.data.iter().zip(&weights).map(|(x, w)| x * w).sum()
        };
        let mut adj = JetBatch::zeros(1, 1, 2);
        adj.data.copy_from_slice(&weights);
        let zbar = tanh_backward(&pre, &adj);
        for k in 0..5 {
            let mut plus = pre.clone();
            let mut minus = pre.clone();
            plus.data[k] += 1e-6;
            minus.data[k] -= 1e-6;
            let fd = (f(&plus) - f(&minus)) / 2e-6;
            assert!((fd - zbar.data[k]).abs() < 1e-8, "component {k}: {fd} vs {}", zbar.data[k]);
        }
    }
}
