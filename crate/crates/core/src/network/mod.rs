//! Fully connected tanh networks and the boundary-conforming surrogate
//! `û = g + h·N_u` with an optional radially clamped multiplier head.

pub mod checkpoint;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diff_engine::batch::{self, JetBatch};
use crate::diff_engine::{jet_affine, jet_tanh, Jet2, ParamGrad, Scalar};
use crate::error::{arg_err, state_err, Result};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};

/// Dense network with tanh hidden layers and an identity output layer.
///
/// Parameters live in one flat vector in canonical order: layer by layer,
/// the weight matrix row-major (`out × in`) followed by the bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl MlpNet {
    /// A network with all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        validate_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        validate_sizes(sizes)?;
        if params.len() != param_count(sizes) {
            return arg_err(format!(
                "expected {} parameters for sizes {:?}, got {}",
                param_count(sizes),
                sizes,
                params.len()
            ));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of the weight and bias blocks of layer `k`.
    fn layer_offsets(&self, k: usize) -> (usize, usize) {
        let mut off = 0;
        for j in 0..k {
            off += self.sizes[j] * self.sizes[j + 1] + self.sizes[j + 1];
        }
        (off, off + self.sizes[k] * self.sizes[k + 1])
    }

    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.layer_offsets(k);
        let n_out = self.sizes[k + 1];
        (&self.params[w..b], &self.params[b..b + n_out])
    }

    /// Jets of every output at a single point.
    pub fn eval_raw(&self, x: &[f64]) -> Result<Vec<Jet2>> {
        if x.len() != self.input_dim() {
            return arg_err(format!(
                "point has dimension {}, network expects {}",
                x.len(),
                self.input_dim()
            ));
        }
        let mut acts = Jet2::lift_all(x);
        for k in 0..self.num_layers() {
            let (w, b) = self.layer(k);
            let n_in = self.sizes[k];
            let mut next = Vec::with_capacity(b.len());
            for (r, &bias) in b.iter().enumerate() {
                let z = jet_affine(&acts, &w[r * n_in..(r + 1) * n_in], bias)?;
                next.push(if k + 1 < self.num_layers() { jet_tanh(&z) } else { z });
            }
            acts = next;
        }
        Ok(acts)
    }

    /// Batched forward pass over points stored contiguously; the returned
    /// trace is what [`MlpNet::backward_batch`] needs.
    pub fn forward_batch(&self, coords: &[f64], track_derivatives: bool) -> Result<BatchTrace> {
        let d = self.input_dim();
        if coords.len() % d != 0 {
            return arg_err(format!("coordinate buffer not a multiple of dimension {d}"));
        }
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut pres = Vec::with_capacity(self.num_layers());
        let mut act = JetBatch::from_points(coords, d, track_derivatives);
        for k in 0..self.num_layers() {
            let (w, b) = self.layer(k);
            let z = batch::dense_forward(w, b, &act);
            let next = if k + 1 < self.num_layers() {
                batch::tanh_forward(&z)
            } else {
                z.clone()
            };
            inputs.push(act);
            pres.push(z);
            act = next;
        }
        Ok(BatchTrace { inputs, pres })
    }

    /// Output values only, one row per output, `batch` columns.
    pub fn predict(&self, coords: &[f64]) -> Result<JetBatch> {
        let mut trace = self.forward_batch(coords, false)?;
        Ok(trace.pres.pop().expect("at least one layer"))
    }

    /// Parameter gradient given the adjoint of the output jets.
    pub fn backward_batch(&self, trace: &BatchTrace, out_adj: &JetBatch) -> ParamGrad {
        let mut grad = ParamGrad::zeros(self.param_count());
        let mut adj = out_adj.clone();
        for k in (0..self.num_layers()).rev() {
            if k + 1 < self.num_layers() {
                adj = batch::tanh_backward(&trace.pres[k], &adj);
            }
            let (w_off, b_off) = self.layer_offsets(k);
            let n_out = self.sizes[k + 1];
            let (w, _) = self.layer(k);
            let g = grad.as_mut_slice();
            let (wg, rest) = g[w_off..].split_at_mut(b_off - w_off);
            adj = batch::dense_backward(w, &trace.inputs[k], &adj, wg, &mut rest[..n_out]);
        }
        grad
    }
}

/// Records of a batched forward pass: layer inputs and pre-activations.
#[derive(Clone, Debug)]
pub struct BatchTrace {
    pub inputs: Vec<JetBatch>,
    pub pres: Vec<JetBatch>,
}

impl BatchTrace {
    pub fn output(&self) -> &JetBatch {
        self.pres.last().expect("at least one layer")
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return arg_err(format!("need input and output sizes, got {sizes:?}"));
    }
    if sizes.contains(&0) {
        return arg_err(format!("layer sizes must be positive, got {sizes:?}"));
    }
    Ok(())
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Deterministic initialization: every weight and bias of a layer is drawn
/// from `U(−1/√fan_in, 1/√fan_in)`, layer by layer in canonical order.
pub fn init_net(layer_sizes: &[usize], seed: u64) -> Result<MlpNet> {
    let mut net = MlpNet::zeros(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut off = 0;
    for w in layer_sizes.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        let n = w[0] * w[1] + w[1];
        for p in &mut net.params[off..off + n] {
            *p = rng.gen_range(-bound..bound);
        }
        off += n;
    }
    Ok(net)
}

/// Hidden widths `[width; layers]` framed by input and output sizes.
pub fn layer_sizes(input: usize, hidden_layers: usize, width: usize, output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat(width).take(hidden_layers));
    sizes.push(output);
    sizes
}

pub type JetField = Arc<dyn Fn(&[f64]) -> Jet2 + Send + Sync>;

/// Distance factor `h` (vanishing on the Dirichlet boundary) and lift `g`
/// (carrying the boundary values).
#[derive(Clone)]
pub struct BoundaryData {
    pub h: JetField,
    pub g: JetField,
}

impl BoundaryData {
    pub fn new(h: JetField, g: JetField) -> Self {
        Self { h, g }
    }

    pub fn homogeneous(h: JetField) -> Self {
        Self {
            h,
            g: Arc::new(|x: &[f64]| Jet2::constant(x.len(), 0.0)),
        }
    }

    /// `h ≡ 1, g ≡ 0`: the raw network, used when the boundary condition
    /// is penalized instead of built in.
    pub fn unconstrained() -> Self {
        Self {
            h: Arc::new(|x: &[f64]| Jet2::constant(x.len(), 1.0)),
            g: Arc::new(|x: &[f64]| Jet2::constant(x.len(), 0.0)),
        }
    }
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData { .. }")
    }
}

/// `û = g + h·N_u`.
pub fn compose_u<T: Scalar>(n_u: &Jet2<T>, h: &Jet2<f64>, g: &Jet2<f64>) -> Jet2<T> {
    n_u.mul_const_jet(h).add_const_jet(g)
}

// Keeps the rounded norm of a clamped vector at or below τ.
const CLAMP_SHRINK: f64 = 1.0 - 4.0 * f64::EPSILON;

/// `τN/max{τ, |N|}` on jets. On `|N| ≤ τ` the identity branch (and its
/// derivatives) is used, otherwise `τN/|N|` differentiated exactly.
pub fn clamp_lambda<T: Scalar>(raw: &[Jet2<T>], tau: f64) -> Vec<Jet2<T>> {
    let norm_sq: f64 = raw.iter().map(|j| j.value.value().powi(2)).sum();
    if norm_sq.sqrt() <= tau {
        return raw.to_vec();
    }
    let mut sq = raw[0].mul_jet(&raw[0]);
    for j in &raw[1..] {
        sq = &sq + &j.mul_jet(j);
    }
    let inv_norm = sq.sqrt().recip().scale(tau * CLAMP_SHRINK);
    raw.iter().map(|j| j.mul_jet(&inv_norm)).collect()
}

/// The trained surrogate: network, boundary data and optional multiplier bound.
#[derive(Clone, Debug)]
pub struct SurrogateField {
    pub net: MlpNet,
    pub boundary: BoundaryData,
    pub tau_clamp: Option<f64>,
}

impl SurrogateField {
    pub fn new(net: MlpNet, boundary: BoundaryData, tau_clamp: Option<f64>) -> Result<Self> {
        if let Some(tau) = tau_clamp {
            if !(tau > 0.0) {
                return arg_err(format!("clamp bound must be positive, got {tau}"));
            }
        }
        Ok(Self {
            net,
            boundary,
            tau_clamp,
        })
    }

    pub fn eval_u(&self, x: &[f64]) -> Result<Jet2> {
        let raw = self.net.eval_raw(x)?;
        Ok(compose_u(&raw[0], &(self.boundary.h)(x), &(self.boundary.g)(x)))
    }

    pub fn eval_lambda(&self, x: &[f64]) -> Result<Vec<Jet2>> {
        if self.net.output_dim() < 2 {
            return state_err("network has no multiplier outputs");
        }
        let raw = self.net.eval_raw(x)?;
        Ok(match self.tau_clamp {
            Some(tau) => clamp_lambda(&raw[1..], tau),
            None => raw[1..].to_vec(),
        })
    }

    /// Values of `û` at a batch of points.
    pub fn predict_u(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let d = self.net.input_dim();
        let out = self.net.predict(coords)?;
        Ok((0..out.batch)
            .map(|p| {
                let x = &coords[p * d..(p + 1) * d];
                let h = (self.boundary.h)(x).value;
                let g = (self.boundary.g)(x).value;
                g + h * out.get(0, 0, p)
            })
            .collect())
    }
}
