//! Elliptic operators, pointwise residuals and loss assembly.
//!
//! Every residual is written against [`Scalar`]: with `f64` jets it checks
//! closed-form solutions, with tape jets it becomes the training loss.

use std::fmt;
use std::sync::Arc;

use crate::diff_engine::{Jet2, ParamGrad, Scalar, Tape, Var};
use crate::diff_engine::batch::JetBatch;
use crate::error::{arg_err, state_err, Result};
use crate::network::{clamp_lambda, compose_u, SurrogateField};
use crate::prox::{soft_threshold_s, vector_shrink_s};

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `A v = −α Δv + β·∇v + γ v` with constant coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma: f64,
}

impl OperatorSpec {
    pub fn new(alpha: f64, beta: Vec<f64>, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return arg_err(format!("alpha must be positive, got {alpha}"));
        }
        if gamma < 0.0 {
            return arg_err(format!("gamma must be nonnegative, got {gamma}"));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// `−Δ` in `d` dimensions.
    pub fn neg_laplacian(d: usize) -> Self {
        Self {
            alpha: 1.0,
            beta: vec![0.0; d],
            gamma: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }
}

pub fn apply_a<T: Scalar>(op: &OperatorSpec, u: &Jet2<T>) -> Result<T> {
    if u.dim() != op.dim() {
        return arg_err(format!(
            "operator is {}-dimensional, jet is {}-dimensional",
            op.dim(),
            u.dim()
        ));
    }
    let mut out = u.laplacian() * (-op.alpha);
    for (&g, &b) in u.grad.iter().zip(&op.beta) {
        if b != 0.0 {
            out = out + g * b;
        }
    }
    if op.gamma != 0.0 {
        out = out + u.value * op.gamma;
    }
    Ok(out)
}

/// Which residual the problem is trained on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CaseTag {
    /// Obstacle: indicator of `{v ≥ ψ}`.
    Case1,
    /// `τ∫|v|`.
    Case2,
    /// Gradient constraint `|∇v| ≤ 1` with multiplier.
    Case3,
    /// `τ∫|∇v|`, complementarity form with clamped multiplier.
    Case4Primal,
    /// `τ∫|∇v|`, shrinkage form with free multiplier.
    Case4Shrink,
    /// Boundary friction `τ∫_Γ|v|` with scalar multiplier on `Γ_C`.
    Friction,
    /// Obstacle with the boundary condition penalized.
    Case1Soft,
}

impl CaseTag {
    pub fn needs_obstacle(self) -> bool {
        matches!(self, CaseTag::Case1 | CaseTag::Case1Soft)
    }

    pub fn needs_tau(self) -> bool {
        matches!(
            self,
            CaseTag::Case2 | CaseTag::Case4Primal | CaseTag::Case4Shrink | CaseTag::Friction
        )
    }

    pub fn needs_boundary_points(self) -> bool {
        matches!(self, CaseTag::Friction | CaseTag::Case1Soft)
    }

    /// Network output width for input dimension `d`.
    pub fn output_width(self, d: usize) -> usize {
        match self {
            CaseTag::Case1 | CaseTag::Case2 | CaseTag::Case1Soft => 1,
            CaseTag::Case3 | CaseTag::Case4Primal | CaseTag::Case4Shrink => d + 1,
            CaseTag::Friction => 2,
        }
    }
}

/// Loss weights; all 1 unless overridden.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub boundary: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
            boundary: 1.0,
        }
    }
}

impl LossWeights {
    pub fn scaled(self, c: f64) -> Self {
        Self {
            w1: self.w1 * c,
            w2: self.w2 * c,
            w3: self.w3 * c,
            boundary: self.boundary * c,
        }
    }
}

#[derive(Clone)]
pub struct EviProblem {
    pub case: CaseTag,
    pub operator: OperatorSpec,
    pub source: ScalarField,
    pub obstacle: Option<ScalarField>,
    pub tau: Option<f64>,
    pub eta: f64,
    pub weights: LossWeights,
    /// Boundary values penalized in soft-constraint mode.
    pub dirichlet: Option<ScalarField>,
}

impl fmt::Debug for EviProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EviProblem")
            .field("case", &self.case)
            .field("operator", &self.operator)
            .field("has_obstacle", &self.obstacle.is_some())
            .field("tau", &self.tau)
            .field("eta", &self.eta)
            .field("weights", &self.weights)
            .field("has_dirichlet", &self.dirichlet.is_some())
            .finish()
    }
}

impl EviProblem {
    pub fn new(
        case: CaseTag,
        operator: OperatorSpec,
        source: ScalarField,
        obstacle: Option<ScalarField>,
        tau: Option<f64>,
        eta: f64,
    ) -> Result<Self> {
        if !(eta > 0.0) {
            return arg_err(format!("eta must be positive, got {eta}"));
        }
        if case.needs_obstacle() != obstacle.is_some() {
            return arg_err(format!("{case:?}: obstacle presence mismatch"));
        }
        if case.needs_tau() != tau.is_some() {
            return arg_err(format!("{case:?}: tau presence mismatch"));
        }
        if let Some(t) = tau {
            if !(t > 0.0) {
                return arg_err(format!("tau must be positive, got {t}"));
            }
        }
        Ok(Self {
            case,
            operator,
            source,
            obstacle,
            tau,
            eta,
            weights: LossWeights::default(),
            dirichlet: None,
        })
    }

    pub fn with_weights(mut self, weights: LossWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_dirichlet(mut self, g: ScalarField) -> Self {
        self.dirichlet = Some(g);
        self
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    fn tau(&self) -> Result<f64> {
        match self.tau {
            Some(t) => Ok(t),
            None => state_err(format!("{:?} problem has no tau", self.case)),
        }
    }

    fn psi(&self, x: &[f64]) -> Result<f64> {
        match &self.obstacle {
            Some(psi) => Ok(psi(x)),
            None => state_err(format!("{:?} problem has no obstacle", self.case)),
        }
    }

    /// `w = (I − ηA)û + ηf`.
    fn prox_argument<T: Scalar>(&self, u: &Jet2<T>, x: &[f64]) -> Result<T> {
        let au = apply_a(&self.operator, u)?;
        Ok(u.value - au * self.eta + self.eta * (self.source)(x))
    }
}

/// `ReLU{(I−ηA)û + ηf − ψ} + ψ − û`.
pub fn residual_case1<T: Scalar>(problem: &EviProblem, u: &Jet2<T>, x: &[f64]) -> Result<T> {
    let psi = problem.psi(x)?;
    let w = problem.prox_argument(u, x)?;
    Ok((w - psi).relu() + psi - u.value)
}

/// `sgn(w)·ReLU{|w| − τη} − û` with `w = (I−ηA)û + ηf`.
pub fn residual_case2<T: Scalar>(problem: &EviProblem, u: &Jet2<T>, x: &[f64]) -> Result<T> {
    let tau = problem.tau()?;
    let w = problem.prox_argument(u, x)?;
    Ok(soft_threshold_s(w, tau * problem.eta) - u.value)
}

/// `Aû − f + ∇·λ̂`.
fn equilibrium<T: Scalar>(problem: &EviProblem, u: &Jet2<T>, lambda: &[Jet2<T>], x: &[f64]) -> Result<T> {
    let mut r = apply_a(&problem.operator, u)? - (problem.source)(x);
    for (i, l) in lambda.iter().enumerate() {
        r = r + l.grad[i];
    }
    Ok(r)
}

fn check_lambda<T: Scalar>(u: &Jet2<T>, lambda: &[Jet2<T>]) -> Result<()> {
    if lambda.len() != u.dim() || lambda.iter().any(|l| l.dim() != u.dim()) {
        return arg_err(format!(
            "multiplier has {} components for a {}-dimensional problem",
            lambda.len(),
            u.dim()
        ));
    }
    Ok(())
}

/// `∇û − ηλ̂`
fn shifted_gradient<T: Scalar>(eta: f64, u: &Jet2<T>, lambda: &[Jet2<T>]) -> Vec<T> {
    u.grad
        .iter()
        .zip(lambda)
        .map(|(&g, l)| g - l.value * eta)
        .collect()
}

/// Gradient-constraint residuals:
/// `r₁ = (∇û−ηλ̂)/(ReLU{|∇û−ηλ̂|−1}+1) − ∇û`, `r₂ = Aû − f + ∇·λ̂`.
pub fn residual_case3<T: Scalar>(
    problem: &EviProblem,
    u: &Jet2<T>,
    lambda: &[Jet2<T>],
    x: &[f64],
) -> Result<(Vec<T>, T)> {
    check_lambda(u, lambda)?;
    let q = shifted_gradient(problem.eta, u, lambda);
    let qnorm: f64 = q.iter().map(|v| v.value().powi(2)).sum::<f64>().sqrt();
    let r1 = if qnorm > 1.0 {
        let denom = (crate::prox::norm_s(&q) - 1.0).relu() + 1.0;
        q.iter().zip(&u.grad).map(|(&v, &g)| v / denom - g).collect()
    } else {
        // denominator is exactly 1 on the ball
        q.iter().zip(&u.grad).map(|(&v, &g)| v - g).collect()
    };
    Ok((r1, equilibrium(problem, u, lambda, x)?))
}

/// Shrinkage-form residuals: `r₁ = S_{τη}(∇û − ηλ̂) − ∇û`, `r₂ = Aû − f + ∇·λ̂`.
pub fn residual_case4_shrink<T: Scalar>(
    problem: &EviProblem,
    u: &Jet2<T>,
    lambda: &[Jet2<T>],
    x: &[f64],
) -> Result<(Vec<T>, T)> {
    check_lambda(u, lambda)?;
    let tau = problem.tau()?;
    let q = shifted_gradient(problem.eta, u, lambda);
    let s = vector_shrink_s(&q, tau * problem.eta);
    let r1 = s.iter().zip(&u.grad).map(|(&v, &g)| v - g).collect();
    Ok((r1, equilibrium(problem, u, lambda, x)?))
}

// Slack allowed on |λ̂| ≤ τ for clamped multipliers (rounding only).
const CLAMP_TOL: f64 = 1e-12;

/// Complementarity-form residuals: `r₁ = λ̂·∇û + τ|∇û|`, `r₂ = Aû − f + ∇·λ̂`.
/// `λ̂` must already satisfy `|λ̂| ≤ τ`.
pub fn residual_case4_primal<T: Scalar>(
    problem: &EviProblem,
    u: &Jet2<T>,
    lambda: &[Jet2<T>],
    x: &[f64],
) -> Result<(T, T)> {
    check_lambda(u, lambda)?;
    let tau = problem.tau()?;
    let lnorm: f64 = lambda.iter().map(|l| l.value.value().powi(2)).sum::<f64>().sqrt();
    if lnorm > tau * (1.0 + CLAMP_TOL) {
        return state_err(format!("multiplier norm {lnorm} exceeds tau {tau}; clamp it first"));
    }
    let mut r1 = u.grad[0] * lambda[0].value;
    for (g, l) in u.grad.iter().zip(lambda).skip(1) {
        r1 = r1 + *g * l.value;
    }
    let gnorm: f64 = u.grad.iter().map(|g| g.value().powi(2)).sum::<f64>().sqrt();
    if gnorm > 0.0 {
        r1 = r1 + crate::prox::norm_s(&u.grad) * tau;
    }
    Ok((r1, equilibrium(problem, u, lambda, x)?))
}

/// Residual components of the friction problem at one point.
#[derive(Clone, Debug, PartialEq)]
pub enum FrictionResidual<T> {
    Interior { equilibrium: T },
    Contact { complementarity: T, flux: T },
}

/// Friction residuals. Interior points give `Aû − f`; contact points with
/// outward normal `n` give `λ̂û + τ|û|` and `∂û/∂n − λ̂`.
pub fn residual_friction<T: Scalar>(
    problem: &EviProblem,
    u: &Jet2<T>,
    lambda: Option<T>,
    normal: Option<&[f64]>,
    x: &[f64],
) -> Result<FrictionResidual<T>> {
    match (lambda, normal) {
        (None, None) => Ok(FrictionResidual::Interior {
            equilibrium: apply_a(&problem.operator, u)? - (problem.source)(x),
        }),
        (Some(l), Some(n)) => {
            let tau = problem.tau()?;
            if n.len() != u.dim() {
                return arg_err("normal dimension mismatch");
            }
            let mut dn = u.grad[0] * n[0];
            for (&g, &ni) in u.grad.iter().zip(n).skip(1) {
                if ni != 0.0 {
                    dn = dn + g * ni;
                }
            }
            Ok(FrictionResidual::Contact {
                complementarity: l * u.value + u.value.abs() * tau,
                flux: dn - l,
            })
        }
        _ => arg_err("contact residual needs both a multiplier and an outward normal"),
    }
}

/// One named loss term. Vector residuals store all entries of a point
/// consecutively, so `values.len()` may exceed `points`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualComponent {
    pub name: String,
    pub values: Vec<f64>,
    pub weight: f64,
    pub points: usize,
}

/// Named residual components and the resulting weighted mean-square loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub components: Vec<ResidualComponent>,
    pub loss: f64,
}

impl ResidualReport {
    /// `Σ weight · (Σ residual²) / points`, recomputed from the components.
    pub fn recompute_loss(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.values.iter().map(|v| v * v).sum::<f64>() / c.points as f64)
            .sum()
    }

    pub fn component(&self, name: &str) -> Option<&ResidualComponent> {
        self.components.iter().find(|c| c.name == name)
    }
}

/// Training points for one loss evaluation. `boundary` carries outward
/// normals for the friction contact set, or the penalized boundary for the
/// soft-constraint obstacle mode.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pub dim: usize,
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
    pub normals: Vec<f64>,
}

impl TrainingSet {
    pub fn interior_count(&self) -> usize {
        self.interior.len() / self.dim
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.len() / self.dim
    }
}

/// Loss value, parameter gradient and per-component residuals.
#[derive(Clone, Debug)]
pub struct LossEval {
    pub loss: f64,
    pub grad: ParamGrad,
    pub report: ResidualReport,
}

struct Accumulator<'t> {
    names: Vec<&'static str>,
    weights: Vec<f64>,
    terms: Vec<Vec<Var<'t>>>,
}

impl<'t> Accumulator<'t> {
    fn new() -> Self {
        Self {
            names: Vec::new(),
            weights: Vec::new(),
            terms: Vec::new(),
        }
    }

    fn slot(&mut self, name: &'static str, weight: f64) -> usize {
        match self.names.iter().position(|&n| n == name) {
            Some(i) => i,
            None => {
                self.names.push(name);
                self.weights.push(weight);
                self.terms.push(Vec::new());
                self.names.len() - 1
            }
        }
    }

    fn push(&mut self, name: &'static str, weight: f64, r: Var<'t>) {
        let i = self.slot(name, weight);
        self.terms[i].push(r);
    }

    /// Mean-square of each component (vector components contribute their
    /// squared norm per point), weighted and summed.
    fn finish(self, tape: &'t Tape, points_per_component: &[usize]) -> (Var<'t>, ResidualReport) {
        let mut total: Option<Var<'t>> = None;
        let mut components = Vec::new();
        for (k, terms) in self.terms.iter().enumerate() {
            let npts = points_per_component[k] as f64;
            let sq = terms.iter().fold(None, |acc: Option<Var<'t>>, &r| {
                Some(match acc {
                    Some(a) => a + r * r,
                    None => r * r,
                })
            });
            let Some(sq) = sq else { continue };
            let term = sq * (self.weights[k] / npts);
            total = Some(match total {
                Some(t) => t + term,
                None => term,
            });
            components.push(ResidualComponent {
                name: self.names[k].to_string(),
                values: terms.iter().map(|v| v.value()).collect(),
                weight: self.weights[k],
                points: points_per_component[k],
            });
        }
        let total = total.unwrap_or_else(|| tape.constant(0.0));
        (
            total,
            ResidualReport {
                loss: total.value(),
                components,
            },
        )
    }
}

/// Reads the output jets of one point off the batched network output and
/// registers them as tape leaves.
fn leaf_jets<'t>(
    tape: &'t Tape,
    out: &JetBatch,
    point: usize,
    leaves: &mut Vec<(usize, usize, usize, usize)>,
) -> Vec<Jet2<Var<'t>>> {
    let d = out.dim;
    (0..out.rows)
        .map(|k| {
            let mut leaf = |c: usize| {
                let v = tape.leaf(out.get(k, c, point));
                leaves.push((v.index(), k, c, point));
                v
            };
            let value = leaf(0);
            let grad = (0..d).map(|i| leaf(1 + i)).collect();
            let hess_diag = (0..d).map(|i| leaf(1 + d + i)).collect();
            Jet2 {
                value,
                grad,
                hess_diag,
            }
        })
        .collect()
}

/// Full loss and its exact parameter gradient.
///
/// The network is evaluated once on all points; its output jets become tape
/// leaves, the case residuals are recorded on the tape, and the reverse sweep
/// seeds the batched network adjoint.
pub fn loss_total(problem: &EviProblem, surrogate: &SurrogateField, points: &TrainingSet) -> Result<LossEval> {
    let d = problem.dim();
    if points.dim != d || surrogate.net.input_dim() != d {
        return arg_err("training set, network and problem dimensions disagree");
    }
    let n_int = points.interior_count();
    let n_bdy = points.boundary_count();
    if n_int == 0 {
        return arg_err("empty training set");
    }
    if problem.case.needs_boundary_points() && n_bdy == 0 {
        return arg_err(format!("{:?} needs boundary points", problem.case));
    }
    if problem.case == CaseTag::Friction && points.normals.len() != points.boundary.len() {
        return arg_err("every contact point needs an outward normal");
    }
    let need_width = problem.case.output_width(d);
    if surrogate.net.output_dim() != need_width {
        return arg_err(format!(
            "{:?} needs {} network outputs, got {}",
            problem.case,
            need_width,
            surrogate.net.output_dim()
        ));
    }
    let clamp = match problem.case {
        CaseTag::Case4Primal | CaseTag::Friction => Some(problem.tau()?),
        _ => None,
    };

    let mut coords = points.interior.clone();
    coords.extend_from_slice(&points.boundary);
    let trace = surrogate.net.forward_batch(&coords, true)?;
    let out = trace.output();

    let tape = Tape::with_capacity(coords.len() * 40);
    let mut leaves = Vec::with_capacity(out.data.len());
    let mut acc = Accumulator::new();
    let w = problem.weights;

    for p in 0..n_int + n_bdy {
        let x = &coords[p * d..(p + 1) * d];
        let on_boundary = p >= n_int;
        let raw = leaf_jets(&tape, out, p, &mut leaves);
        let u = compose_u(&raw[0], &(surrogate.boundary.h)(x), &(surrogate.boundary.g)(x));
        match (problem.case, on_boundary) {
            (CaseTag::Case1 | CaseTag::Case1Soft, false) => {
                acc.push("prox", 1.0, residual_case1(problem, &u, x)?);
            }
            (CaseTag::Case1Soft, true) => {
                let Some(g) = &problem.dirichlet else {
                    return state_err("soft boundary mode needs boundary values");
                };
                acc.push("boundary", w.boundary, u.value - g(x));
            }
            (CaseTag::Case2, false) => {
                acc.push("prox", 1.0, residual_case2(problem, &u, x)?);
            }
            (CaseTag::Case3 | CaseTag::Case4Shrink | CaseTag::Case4Primal, false) => {
                let lambda = match clamp {
                    Some(tau) => clamp_lambda(&raw[1..], tau),
                    None => raw[1..].to_vec(),
                };
                if problem.case == CaseTag::Case4Primal {
                    let (r1, r2) = residual_case4_primal(problem, &u, &lambda, x)?;
                    acc.push("complementarity", w.w1, r1);
                    acc.push("equilibrium", w.w2, r2);
                } else {
                    let (r1, r2) = if problem.case == CaseTag::Case3 {
                        residual_case3(problem, &u, &lambda, x)?
                    } else {
                        residual_case4_shrink(problem, &u, &lambda, x)?
                    };
                    for r in r1 {
                        acc.push("prox", w.w1, r);
                    }
                    acc.push("equilibrium", w.w2, r2);
                }
            }
            (CaseTag::Friction, false) => {
                if let FrictionResidual::Interior { equilibrium } =
                    residual_friction(problem, &u, None, None, x)?
                {
                    acc.push("equilibrium", w.w3, equilibrium);
                }
            }
            (CaseTag::Friction, true) => {
                let lambda = clamp_lambda(&raw[1..], clamp.expect("friction has tau"))[0].value;
                let b = p - n_int;
                let normal = &points.normals[b * d..(b + 1) * d];
                if let FrictionResidual::Contact { complementarity, flux } =
                    residual_friction(problem, &u, Some(lambda), Some(normal), x)?
                {
                    acc.push("complementarity", w.w1, complementarity);
                    acc.push("flux", w.w2, flux);
                }
            }
            (_, true) => {}
        }
    }

    // Per-point means: vector residual entries of one point share its 1/|T|.
    let counts: Vec<usize> = acc
        .names
        .iter()
        .map(|&name| match (problem.case, name) {
            (CaseTag::Case1Soft, "boundary") => n_bdy,
            (CaseTag::Friction, "complementarity" | "flux") => n_bdy,
            _ => n_int,
        })
        .collect();
    let (loss_var, report) = acc.finish(&tape, &counts);
    let adjoints = tape.backward(loss_var)?;

    let mut out_adj = JetBatch::zeros(out.rows, out.batch, out.dim);
    for &(idx, k, c, p) in &leaves {
        out_adj.set(k, c, p, adjoints.at(idx));
    }
    let grad = surrogate.net.backward_batch(&trace, &out_adj);
    Ok(LossEval {
        loss: report.loss,
        grad,
        report,
    })
}
