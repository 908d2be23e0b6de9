//! Training runs: sample once, take one full-batch Adam step per epoch, log
//! loss and test errors.

use std::collections::hash_map::DefaultHasher;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{BenchmarkCase, LossVariant, PointSet};
use crate::error::{arg_err, state_err, Result};
use crate::network::{init_net, layer_sizes, MlpNet, SurrogateField};
use crate::optimizer::{AdamConfig, AdamState};
use crate::problem::{loss_total, EviProblem, LossWeights, TrainingSet};

pub const DEFAULT_LOG_EVERY: usize = 100;

/// Everything that determines a run. Two runs with equal configurations
/// produce identical logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Registry name, optionally with its constant, e.g. `torsion2d(c=1)`.
    pub benchmark: String,
    pub seed: u64,
    pub epochs: usize,
    pub eta: f64,
    pub lr: f64,
    pub loss_variant: LossVariant,
    pub train_size: usize,
    pub test_size: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub weights: LossWeights,
    pub log_every: usize,
    /// Interior points per step; `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Defaults of the named benchmark with seed 0.
    pub fn for_benchmark(name: &str) -> Result<Self> {
        let case = BenchmarkCase::from_name(name)?;
        let h = case.hyper;
        Ok(Self {
            benchmark: case.label(),
            seed: 0,
            epochs: h.epochs,
            eta: case.eta,
            lr: AdamConfig::default().lr,
            loss_variant: case.default_variant(),
            train_size: h.train_size,
            test_size: h.test_size,
            hidden_layers: h.hidden_layers,
            width: h.width,
            weights: LossWeights::default(),
            log_every: DEFAULT_LOG_EVERY,
            batch_size: None,
            out_dir: PathBuf::from("runs").join(case.label()),
        })
    }

    pub fn case(&self) -> Result<BenchmarkCase> {
        BenchmarkCase::from_name(&self.benchmark)
    }

    pub fn validate(&self) -> Result<BenchmarkCase> {
        let case = self.case()?;
        if self.epochs == 0 {
            return arg_err("epochs must be at least 1");
        }
        if !(self.eta > 0.0) {
            return arg_err(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.lr > 0.0) {
            return arg_err(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return arg_err("train and test sizes must be at least 1");
        }
        if self.hidden_layers == 0 || self.width == 0 {
            return arg_err("the network needs at least one hidden layer of nonzero width");
        }
        if self.log_every == 0 {
            return arg_err("log cadence must be at least 1");
        }
        if self.batch_size == Some(0) {
            return arg_err("batch size must be at least 1");
        }
        if !case.supports(self.loss_variant) {
            return arg_err(format!("{} does not support the '{}' loss", case.name, self.loss_variant));
        }
        Ok(case)
    }

    pub fn layer_sizes(&self, case: &BenchmarkCase) -> Result<Vec<usize>> {
        let out = case.case_tag(self.loss_variant)?.output_width(case.dim());
        Ok(layer_sizes(case.dim(), self.hidden_layers, self.width, out))
    }

    pub fn problem(&self, case: &BenchmarkCase) -> Result<EviProblem> {
        Ok(case.problem(self.eta, self.loss_variant)?.with_weights(self.weights))
    }

    /// Surrogate around `net` with this configuration's boundary treatment.
    pub fn surrogate(&self, case: &BenchmarkCase, net: MlpNet) -> Result<SurrogateField> {
        SurrogateField::new(net, case.boundary_data(self.loss_variant)?, case.tau_clamp(self.loss_variant)?)
    }
}

/// Discrete error norms of a prediction against exact values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `‖û − u‖₂ / ‖u‖₂`, or the absolute norm when `absolute` is set.
    pub l2_rel: f64,
    /// `max|û − u| / max|u|`, or the absolute maximum when `absolute` is set.
    pub linf_rel: f64,
    /// `max|û − u|`
    pub max_abs: f64,
    /// `(1/N) Σ |û − u|/|u|` over the points with `u ≠ 0`.
    pub mean_rel: f64,
    /// The exact values vanish identically; norms are absolute.
    pub absolute: bool,
}

pub fn relative_errors(pred: &[f64], exact: &[f64]) -> Result<ErrorMetrics> {
    if pred.len() != exact.len() || pred.is_empty() {
        return arg_err(format!(
            "need equally many predicted and exact values, got {} and {}",
            pred.len(),
            exact.len()
        ));
    }
    let diff_sq: f64 = pred.iter().zip(exact).map(|(p, e)| (p - e) * (p - e)).sum();
    let norm_sq: f64 = exact.iter().map(|e| e * e).sum();
    let max_abs = pred.iter().zip(exact).map(|(p, e)| (p - e).abs()).fold(0.0, f64::max);
    let max_exact = exact.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let (mut rel_sum, mut nonzero) = (0.0, 0usize);
    for (p, e) in pred.iter().zip(exact) {
        if *e != 0.0 {
            rel_sum += (p - e).abs() / e.abs();
            nonzero += 1;
        }
    }
    let mean_rel = if nonzero > 0 { rel_sum / nonzero as f64 } else { f64::NAN };
    if norm_sq == 0.0 {
        return Ok(ErrorMetrics {
            l2_rel: diff_sq.sqrt(),
            linf_rel: max_abs,
            max_abs,
            mean_rel,
            absolute: true,
        });
    }
    Ok(ErrorMetrics {
        l2_rel: (diff_sq / norm_sq).sqrt(),
        linf_rel: max_abs / max_exact,
        max_abs,
        mean_rel,
        absolute: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    /// Loss of the step taken in this epoch.
    pub loss: f64,
    /// Test errors of the parameters after the step.
    pub l2_rel: f64,
    pub linf_rel: f64,
    /// Wall-clock seconds since the start of training; not part of the CSV.
    pub elapsed: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

/// Header of `run_log.csv`.
pub const RUN_LOG_HEADER: &str = "epoch,loss,l2_rel,linf_rel";

impl RunLog {
    /// The log table. Numbers use the shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RUN_LOG_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(s, "{},{:e},{:e},{:e}", r.epoch, r.loss, r.l2_rel, r.linf_rel);
        }
        s
    }

    pub fn last(&self) -> Option<&LogRecord> {
        self.records.last()
    }
}

/// Result of a run. After divergence `net` holds the last finite
/// parameters and `diverged` the failing epoch.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub log: RunLog,
    pub net: MlpNet,
    pub errors: ErrorMetrics,
    pub test_points: PointSet,
    pub exact: Vec<f64>,
    pub predicted: Vec<f64>,
    pub diverged: Option<(usize, String)>,
}

fn hash_training_set(t: &TrainingSet) -> u64 {
    let mut h = DefaultHasher::new();
    for v in t.interior.iter().chain(&t.boundary).chain(&t.normals) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Exact values and predictions on `points`, with their error norms.
pub fn evaluate(
    case: &BenchmarkCase,
    surrogate: &SurrogateField,
    points: &PointSet,
) -> Result<(Vec<f64>, Vec<f64>, ErrorMetrics)> {
    let exact = points.iter().map(|x| case.exact_u(x)).collect::<Result<Vec<_>>>()?;
    let pred = surrogate.predict_u(&points.coords)?;
    let errors = relative_errors(&pred, &exact)?;
    Ok((exact, pred, errors))
}

/// Interior points of one minibatch step.
struct Batcher {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    size: usize,
}

impl Batcher {
    fn new(n: usize, size: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6261_7463_6865_7321),
            order: (0..n).collect(),
            cursor: n,
            size: size.min(n),
        }
    }

    fn next(&mut self, full: &TrainingSet) -> TrainingSet {
        if self.cursor + self.size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let d = full.dim;
        let mut interior = Vec::with_capacity(self.size * d);
        for &i in &self.order[self.cursor..self.cursor + self.size] {
            interior.extend_from_slice(&full.interior[i * d..(i + 1) * d]);
        }
        self.cursor += self.size;
        TrainingSet {
            dim: d,
            interior,
            boundary: full.boundary.clone(),
            normals: full.normals.clone(),
        }
    }
}

/// Runs the configured training.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let case = config.validate()?;
    let problem = config.problem(&case)?;
    let sizes = config.layer_sizes(&case)?;
    let mut surrogate = config.surrogate(&case, init_net(&sizes, config.seed)?)?;
    let train = case.training_set(config.loss_variant, config.train_size, config.seed)?;
    let train_hash = hash_training_set(&train);
    let test_points = case.test_points(config.test_size)?;
    let exact = test_points.iter().map(|x| case.exact_u(x)).collect::<Result<Vec<_>>>()?;

    let mut adam = AdamState::new(
        surrogate.net.param_count(),
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    )?;
    let mut batcher = config
        .batch_size
        .map(|b| Batcher::new(train.interior_count(), b, config.seed));
    let mut log = RunLog::default();
    let mut diverged = None;
    let start = Instant::now();

    for epoch in 1..=config.epochs {
        let eval = match &mut batcher {
            Some(b) => loss_total(&problem, &surrogate, &b.next(&train))?,
            None => loss_total(&problem, &surrogate, &train)?,
        };
        if !eval.loss.is_finite() || !eval.grad.is_finite() {
            diverged = Some((epoch, format!("non-finite loss {}", eval.loss)));
            break;
        }
        let previous = surrogate.net.params().to_vec();
        adam.step(surrogate.net.params_mut(), &eval.grad)?;
        if surrogate.net.params().iter().any(|p| !p.is_finite()) {
            surrogate.net.params_mut().copy_from_slice(&previous);
            diverged = Some((epoch, "non-finite parameters".into()));
            break;
        }
        if epoch % config.log_every == 0 || epoch == config.epochs || epoch == 1 {
            if hash_training_set(&train) != train_hash {
                return state_err("training set changed during the run");
            }
            let pred = surrogate.predict_u(&test_points.coords)?;
            let e = relative_errors(&pred, &exact)?;
            log.records.push(LogRecord {
                epoch,
                loss: eval.loss,
                l2_rel: e.l2_rel,
                linf_rel: e.linf_rel,
                elapsed: start.elapsed().as_secs_f64(),
            });
        }
    }

    let predicted = surrogate.predict_u(&test_points.coords)?;
    let errors = relative_errors(&predicted, &exact)?;
    Ok(RunOutcome {
        config: config.clone(),
        log,
        net: surrogate.net,
        errors,
        test_points,
        exact,
        predicted,
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_norms() {
        let u = vec![1.0, -2.0, 3.0];
        let e = relative_errors(&u, &u).unwrap();
        assert_eq!((e.l2_rel, e.linf_rel), (0.0, 0.0));
        let twice: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let e = relative_errors(&twice, &u).unwrap();
        assert!((e.l2_rel - 1.0).abs() < 1e-15 && (e.linf_rel - 1.0).abs() < 1e-15);
        assert!((e.mean_rel - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_offset_norms() {
        // ‖ε·1‖₂/‖1‖₂ = ε and max ε / max 1 = ε
        let ones = vec![1.0; 1000];
        let shifted = vec![1.0 + 1e-3; 1000];
        let e = relative_errors(&shifted, &ones).unwrap();
        assert!((e.l2_rel - 1e-3).abs() < 1e-12);
        assert!((e.linf_rel - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn zero_exact_falls_back_to_absolute() {
        let e = relative_errors(&[0.5, -0.5], &[0.0, 0.0]).unwrap();
        assert!(e.absolute);
        assert!((e.l2_rel - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(e.linf_rel, 0.5);
        assert!(relative_errors(&[1.0], &[]).is_err());
    }

    #[test]
    fn defaults_follow_the_table() {
        let c = RunConfig::for_benchmark("bingham2d").unwrap();
        assert_eq!((c.epochs, c.hidden_layers, c.width), (20_000, 10, 50));
        assert_eq!(c.loss_variant, LossVariant::Primal);
        assert_eq!(c.eta, 1e-3);
        assert_eq!(c.benchmark, "bingham2d(tau=1)");
        assert!(c.case().is_ok());
    }

    #[test]
    fn invalid_configs() {
        let mut c = RunConfig::for_benchmark("obstacle1d_sym").unwrap();
        c.epochs = 0;
        assert!(run(&c).is_err());
        c.epochs = 1;
        c.loss_variant = LossVariant::Shrink;
        assert!(run(&c).is_err());
        c.loss_variant = LossVariant::Hard;
        c.benchmark = "nope".into();
        assert!(run(&c).is_err());
    }

    #[test]
    fn single_epoch_takes_one_step() {
        let mut c = RunConfig::for_benchmark("obstacle1d_sym").unwrap();
        c.epochs = 1;
        c.hidden_layers = 1;
        c.width = 8;
        let out = run(&c).unwrap();
        assert_eq!(out.log.records.len(), 1);
        assert_eq!(out.log.records[0].epoch, 1);
        let init = init_net(&out.net.sizes().to_vec(), 0).unwrap();
        assert_ne!(init.params(), out.net.params());
    }

    #[test]
    fn minibatch_runs() {
        let mut c = RunConfig::for_benchmark("obstacle1d_sym").unwrap();
        c.epochs = 20;
        c.hidden_layers = 1;
        c.width = 8;
        c.batch_size = Some(16);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert!(a.diverged.is_none());
    }
}
