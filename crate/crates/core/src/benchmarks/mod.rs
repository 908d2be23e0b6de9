//! The benchmark problems: domains, data, exact solutions and the network
//! and training sizes each one is run with.

mod cases;
mod domain;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cases::{refine_beta, refine_r_star, BenchmarkKind, BETA_PRINTED, PIECEWISE_ALPHA, R_STAR_PRINTED};
pub use domain::{DomainSpec, PointSet, Segment};

use crate::diff_engine::Jet2;
use crate::error::{arg_err, Result};
use crate::network::{layer_sizes, BoundaryData, JetField};
use crate::problem::{
    residual_case1, residual_case3, residual_case4_primal, residual_case4_shrink, residual_friction, CaseTag,
    EviProblem, FrictionResidual, OperatorSpec, ScalarField, TrainingSet,
};

/// Benchmark names accepted by [`BenchmarkCase::from_name`].
pub const BENCHMARK_NAMES: [&str; 7] = [
    "obstacle1d_sym",
    "obstacle1d_nonsym",
    "obstacle1d_piecewise",
    "obstacle2d",
    "torsion2d",
    "bingham2d",
    "friction2d",
];

/// Step size of the proximal reformulation used by every benchmark.
pub const DEFAULT_ETA: f64 = 1e-3;

// Seed of the random test points on disks; independent of the run seed so
// every run is scored on the same points.
const DISK_TEST_SEED: u64 = 0x7e57;

/// How the loss is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    /// Boundary values built into the surrogate.
    Hard,
    /// Boundary values penalized on sampled boundary points (obstacle problems).
    Soft,
    /// Complementarity form with a clamped multiplier (Bingham).
    Primal,
    /// Shrinkage form with a free multiplier (Bingham).
    Shrink,
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LossVariant::Hard => "hard",
            LossVariant::Soft => "soft",
            LossVariant::Primal => "primal",
            LossVariant::Shrink => "shrink",
        };
        f.write_str(s)
    }
}

/// Training and network sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub train_size: usize,
    pub test_size: usize,
    pub epochs: usize,
    pub hidden_layers: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub kind: BenchmarkKind,
    pub domain: DomainSpec,
    /// Boundary part carrying the friction condition.
    pub contact: Option<Segment>,
    pub hyper: Hyperparameters,
    pub eta: f64,
}

fn hyper(train_size: usize, test_size: usize, epochs: usize, hidden_layers: usize, width: usize) -> Hyperparameters {
    Hyperparameters {
        train_size,
        test_size,
        epochs,
        hidden_layers,
        width,
    }
}

const UNIT_DISK: DomainSpec = DomainSpec::Disk {
    center: [0.0, 0.0],
    radius: 1.0,
};

impl BenchmarkCase {
    fn build(name: &'static str, kind: BenchmarkKind, domain: DomainSpec, hyper: Hyperparameters) -> Self {
        Self {
            name,
            kind,
            domain,
            contact: match kind {
                BenchmarkKind::Friction { .. } => Some(Segment::Right),
                _ => None,
            },
            hyper,
            eta: DEFAULT_ETA,
        }
    }

    pub fn obstacle1d_sym() -> Self {
        Self::build(
            "obstacle1d_sym",
            BenchmarkKind::Obstacle1dSym,
            DomainSpec::Interval { a: 0.0, b: 1.0 },
            hyper(50, 1000, 10_000, 3, 100),
        )
    }

    pub fn obstacle1d_nonsym() -> Self {
        Self::build(
            "obstacle1d_nonsym",
            BenchmarkKind::Obstacle1dNonsym,
            DomainSpec::Interval { a: -2.0, b: 2.0 },
            hyper(50, 1000, 10_000, 3, 100),
        )
    }

    pub fn obstacle1d_piecewise(beta: f64) -> Self {
        Self::build(
            "obstacle1d_piecewise",
            BenchmarkKind::Obstacle1dPiecewise { beta },
            DomainSpec::Interval { a: -1.0, b: 1.0 },
            hyper(50, 1000, 10_000, 3, 100),
        )
    }

    pub fn obstacle2d(r_star: f64) -> Self {
        Self::build(
            "obstacle2d",
            BenchmarkKind::Obstacle2d { r_star },
            DomainSpec::Rectangle {
                a: -2.0,
                b: 2.0,
                c: -2.0,
                d: 2.0,
            },
            hyper(1000, 10_000, 10_000, 5, 100),
        )
    }

    pub fn torsion2d(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return arg_err(format!("torsion constant must be positive, got {c}"));
        }
        Ok(Self::build(
            "torsion2d",
            BenchmarkKind::Torsion { c, radius: 1.0 },
            UNIT_DISK,
            hyper(1000, 10_000, 10_000, 3, 100),
        ))
    }

    pub fn bingham2d(tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return arg_err(format!("yield stress must be positive, got {tau}"));
        }
        Ok(Self::build(
            "bingham2d",
            BenchmarkKind::Bingham {
                c: 10.0,
                tau,
                radius: 1.0,
            },
            UNIT_DISK,
            hyper(1000, 10_000, 20_000, 10, 50),
        ))
    }

    pub fn friction2d() -> Self {
        Self::build(
            "friction2d",
            BenchmarkKind::Friction { tau: 1.0 },
            DomainSpec::Rectangle {
                a: 0.0,
                b: 1.0,
                c: 0.0,
                d: 1.0,
            },
            hyper(1000, 10_000, 10_000, 4, 50),
        )
    }

    /// Looks a benchmark up by name. The parametrized problems accept an
    /// inline value, e.g. `torsion2d(c=1)`, `torsion2d(1)` or
    /// `bingham2d(tau=1.5)`; defaults are `c = 4` and `τ = 1`.
    pub fn from_name(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, param) = match spec.split_once('(') {
            Some((n, rest)) => {
                let Some(inner) = rest.strip_suffix(')') else {
                    return arg_err(format!("unbalanced parentheses in '{spec}'"));
                };
                let inner = inner.trim();
                let value = inner.split_once('=').map_or(inner, |(_, v)| v).trim();
                let v = value
                    .parse::<f64>()
                    .map_err(|_| crate::EviError::Argument(format!("bad parameter in '{spec}'")))?;
                (n.trim(), Some(v))
            }
            None => (spec, None),
        };
        match (name, param) {
            ("obstacle1d_sym", None) => Ok(Self::obstacle1d_sym()),
            ("obstacle1d_nonsym", None) => Ok(Self::obstacle1d_nonsym()),
            ("obstacle1d_piecewise", None) => Ok(Self::obstacle1d_piecewise(BETA_PRINTED)),
            ("obstacle2d", None) => Ok(Self::obstacle2d(R_STAR_PRINTED)),
            ("torsion2d", c) => Self::torsion2d(c.unwrap_or(4.0)),
            ("bingham2d", tau) => Self::bingham2d(tau.unwrap_or(1.0)),
            ("friction2d", None) => Ok(Self::friction2d()),
            (n, Some(_)) if BENCHMARK_NAMES.contains(&n) => arg_err(format!("{n} takes no parameter")),
            _ => arg_err(format!(
                "unknown benchmark '{spec}'; expected one of {}",
                BENCHMARK_NAMES.join(", ")
            )),
        }
    }

    /// Replaces the physical constant of a parametrized benchmark.
    pub fn with_constant(self, c: Option<f64>, tau: Option<f64>) -> Result<Self> {
        match (self.kind, c, tau) {
            (_, None, None) => Ok(self),
            (BenchmarkKind::Torsion { .. }, Some(c), None) => Ok(Self { hyper: self.hyper, ..Self::torsion2d(c)? }),
            (BenchmarkKind::Bingham { .. }, None, Some(t)) => Ok(Self { hyper: self.hyper, ..Self::bingham2d(t)? }),
            _ => arg_err(format!("{} does not take the given constant", self.name)),
        }
    }

    /// Name including the physical constant, e.g. `torsion2d(c=4)`.
    pub fn label(&self) -> String {
        match self.kind {
            BenchmarkKind::Torsion { c, .. } => format!("{}(c={c})", self.name),
            BenchmarkKind::Bingham { tau, .. } => format!("{}(tau={tau})", self.name),
            _ => self.name.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn default_variant(&self) -> LossVariant {
        match self.kind {
            BenchmarkKind::Bingham { .. } => LossVariant::Primal,
            _ => LossVariant::Hard,
        }
    }

    pub fn supports(&self, variant: LossVariant) -> bool {
        match self.kind {
            BenchmarkKind::Bingham { .. } => matches!(variant, LossVariant::Primal | LossVariant::Shrink),
            BenchmarkKind::Torsion { .. } | BenchmarkKind::Friction { .. } => variant == LossVariant::Hard,
            _ => matches!(variant, LossVariant::Hard | LossVariant::Soft),
        }
    }

    fn check_variant(&self, variant: LossVariant) -> Result<()> {
        if self.supports(variant) {
            Ok(())
        } else {
            arg_err(format!("{} does not support the '{variant}' loss", self.name))
        }
    }

    pub fn case_tag(&self, variant: LossVariant) -> Result<CaseTag> {
        self.check_variant(variant)?;
        Ok(match (self.kind, variant) {
            (BenchmarkKind::Torsion { .. }, _) => CaseTag::Case3,
            (BenchmarkKind::Bingham { .. }, LossVariant::Shrink) => CaseTag::Case4Shrink,
            (BenchmarkKind::Bingham { .. }, _) => CaseTag::Case4Primal,
            (BenchmarkKind::Friction { .. }, _) => CaseTag::Friction,
            (_, LossVariant::Soft) => CaseTag::Case1Soft,
            _ => CaseTag::Case1,
        })
    }

    pub fn operator(&self) -> OperatorSpec {
        match self.kind {
            BenchmarkKind::Obstacle1dNonsym => OperatorSpec {
                alpha: 1.0,
                beta: vec![1.0],
                gamma: 0.0,
            },
            BenchmarkKind::Friction { .. } => OperatorSpec {
                alpha: 1.0,
                beta: vec![0.0; 2],
                gamma: 1.0,
            },
            _ => OperatorSpec::neg_laplacian(self.dim()),
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self.kind {
            BenchmarkKind::Bingham { tau, .. } | BenchmarkKind::Friction { tau } => Some(tau),
            _ => None,
        }
    }

    /// The problem trained with the given step size and loss form.
    pub fn problem(&self, eta: f64, variant: LossVariant) -> Result<EviProblem> {
        let case = self.case_tag(variant)?;
        let kind = self.kind;
        let source: ScalarField = Arc::new(move |x: &[f64]| kind.source(x));
        let obstacle: Option<ScalarField> = case
            .needs_obstacle()
            .then(|| Arc::new(move |x: &[f64]| kind.obstacle(x).expect("obstacle benchmark")) as ScalarField);
        let problem = EviProblem::new(case, self.operator(), source, obstacle, self.tau(), eta)?;
        Ok(if case == CaseTag::Case1Soft {
            problem.with_dirichlet(Arc::new(move |x: &[f64]| kind.u_jet(&Jet2::lift_all(x)).value))
        } else {
            problem
        })
    }

    /// `h` and `g` with exact jets.
    pub fn boundary_functions(&self) -> (JetField, JetField) {
        let kind = self.kind;
        let h: JetField = Arc::new(move |x: &[f64]| kind.h_jet(&Jet2::lift_all(x)));
        let g: JetField = Arc::new(move |x: &[f64]| kind.g_jet(&Jet2::lift_all(x)));
        (h, g)
    }

    /// Surrogate composition for the loss form: hard constraints use `g + h·N`,
    /// the soft form uses the bare network.
    pub fn boundary_data(&self, variant: LossVariant) -> Result<BoundaryData> {
        self.check_variant(variant)?;
        if variant == LossVariant::Soft {
            return Ok(BoundaryData::unconstrained());
        }
        let (h, g) = self.boundary_functions();
        Ok(BoundaryData::new(h, g))
    }

    /// Radius of the multiplier clamp, if the loss form clamps.
    pub fn tau_clamp(&self, variant: LossVariant) -> Result<Option<f64>> {
        Ok(match self.case_tag(variant)? {
            CaseTag::Case4Primal | CaseTag::Friction => self.tau(),
            _ => None,
        })
    }

    pub fn layer_sizes(&self, variant: LossVariant) -> Result<Vec<usize>> {
        let width = self.case_tag(variant)?.output_width(self.dim());
        Ok(layer_sizes(self.dim(), self.hyper.hidden_layers, self.hyper.width, width))
    }

    pub fn exact_u(&self, x: &[f64]) -> Result<f64> {
        Ok(self.exact_u_jet(x)?.value)
    }

    pub fn exact_u_jet(&self, x: &[f64]) -> Result<Jet2> {
        self.check_point(x)?;
        Ok(self.kind.u_jet(&Jet2::lift_all(x)))
    }

    /// `(ψ, f)` at `x`; `ψ` only for obstacle problems.
    pub fn obstacle_and_source(&self, x: &[f64]) -> Result<(Option<f64>, f64)> {
        self.check_point(x)?;
        Ok((self.kind.obstacle(x), self.kind.source(x)))
    }

    /// A multiplier matching the exact solution (see
    /// [`BenchmarkKind::multiplier_jets`]).
    pub fn consistent_multiplier(&self, x: &[f64]) -> Result<Option<Vec<Jet2>>> {
        self.check_point(x)?;
        Ok(self.kind.multiplier_jets(&Jet2::lift_all(x)))
    }

    pub fn seam_distance(&self, x: &[f64]) -> f64 {
        self.kind.seam_distance(x)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return arg_err(format!("{} expects {}-dimensional points", self.name, self.dim()));
        }
        if !self.domain.contains_closed(x) {
            return arg_err(format!("{x:?} lies outside the domain of {}", self.name));
        }
        Ok(())
    }

    /// Number of boundary training points used with `train_size` interior
    /// points: the friction edge and the soft-constraint boundary get one
    /// fifth as many (at least 2).
    pub fn boundary_train_size(&self, variant: LossVariant, train_size: usize) -> Result<usize> {
        Ok(if self.case_tag(variant)?.needs_boundary_points() {
            (train_size / 5).max(2)
        } else {
            0
        })
    }

    /// Interior points plus, where the loss needs them, boundary points with
    /// normals. Interior and boundary use independent streams of `seed`.
    pub fn training_set(&self, variant: LossVariant, train_size: usize, seed: u64) -> Result<TrainingSet> {
        if train_size == 0 {
            return arg_err("train size must be at least 1");
        }
        let interior = self.domain.sample_interior(train_size, seed);
        let n_bdy = self.boundary_train_size(variant, train_size)?;
        let segment = self.contact.unwrap_or(Segment::All);
        let bdy = self
            .domain
            .sample_boundary(segment, n_bdy, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        Ok(TrainingSet {
            dim: self.dim(),
            interior: interior.coords,
            boundary: bdy.coords,
            normals: bdy.normals,
        })
    }

    /// Test points: an inclusive uniform grid of `test_size` nodes in 1D, a
    /// `√n × √n` grid on rectangles, and fixed-seed uniform points on disks.
    pub fn test_points(&self, test_size: usize) -> Result<PointSet> {
        if test_size == 0 {
            return arg_err("test size must be at least 1");
        }
        match self.domain {
            DomainSpec::Interval { .. } => self.domain.grid(test_size),
            DomainSpec::Rectangle { .. } => {
                let side = (test_size as f64).sqrt().round() as usize;
                if side * side != test_size {
                    return arg_err(format!("rectangle test size must be a square, got {test_size}"));
                }
                self.domain.grid(side)
            }
            DomainSpec::Disk { .. } => Ok(self.domain.sample_interior(test_size, DISK_TEST_SEED)),
        }
    }

    /// Residual components of the exact solution (with the consistent
    /// multiplier) at `x`. `normal` marks a contact point of the friction
    /// problem.
    pub fn exact_residuals(&self, problem: &EviProblem, x: &[f64], normal: Option<&[f64]>) -> Result<Vec<f64>> {
        let u = self.exact_u_jet(x)?;
        let lambda = self.consistent_multiplier(x)?;
        match problem.case {
            CaseTag::Case1 | CaseTag::Case1Soft => Ok(vec![residual_case1(problem, &u, x)?]),
            CaseTag::Case2 => Ok(vec![crate::problem::residual_case2(problem, &u, x)?]),
            CaseTag::Case3 | CaseTag::Case4Shrink => {
                let lambda = lambda.unwrap_or_else(|| vec![Jet2::constant(self.dim(), 0.0); self.dim()]);
                let (mut r1, r2) = if problem.case == CaseTag::Case3 {
                    residual_case3(problem, &u, &lambda, x)?
                } else {
                    residual_case4_shrink(problem, &u, &lambda, x)?
                };
                r1.push(r2);
                Ok(r1)
            }
            CaseTag::Case4Primal => {
                let lambda = lambda.unwrap_or_else(|| vec![Jet2::constant(self.dim(), 0.0); self.dim()]);
                let (r1, r2) = residual_case4_primal(problem, &u, &lambda, x)?;
                Ok(vec![r1, r2])
            }
            CaseTag::Friction => {
                let l = normal.and_then(|_| lambda.map(|l| l[0].value));
                match residual_friction(problem, &u, l, normal, x)? {
                    FrictionResidual::Interior { equilibrium } => Ok(vec![equilibrium]),
                    FrictionResidual::Contact { complementarity, flux } => Ok(vec![complementarity, flux]),
                }
            }
        }
    }
}
