//! Oracles shared by the integration tests and the acceptance target.
#![allow(dead_code)]

use prox_evi::benchmarks::{BenchmarkCase, LossVariant};
use prox_evi::network::{init_net, SurrogateField};
use prox_evi::problem::loss_total;
use prox_evi::prox::{obstacle_clamp, soft_threshold, unit_ball_project, vector_shrink};
use prox_evi::trainer::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every benchmark with every loss it supports.
pub const CASES: [(&str, LossVariant); 10] = [
    ("obstacle1d_sym", LossVariant::Hard),
    ("obstacle1d_sym", LossVariant::Soft),
    ("obstacle1d_nonsym", LossVariant::Hard),
    ("obstacle1d_piecewise", LossVariant::Hard),
    ("obstacle2d", LossVariant::Hard),
    ("torsion2d(c=1)", LossVariant::Hard),
    ("torsion2d(c=4)", LossVariant::Hard),
    ("bingham2d(tau=1)", LossVariant::Primal),
    ("bingham2d(tau=1)", LossVariant::Shrink),
    ("friction2d", LossVariant::Hard),
];

/// Fourth-order central first difference.
pub fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second difference.
pub fn d2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

fn along(x: &[f64], i: usize, t: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[i] = t;
    y
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DerivativeReport {
    pub grad_rel: f64,
    pub lap_rel: f64,
    pub div_rel: f64,
    pub loss_grad_rel: f64,
    pub params: usize,
}

impl DerivativeReport {
    pub fn merge(self, o: Self) -> Self {
        Self {
            grad_rel: self.grad_rel.max(o.grad_rel),
            lap_rel: self.lap_rel.max(o.lap_rel),
            div_rel: self.div_rel.max(o.div_rel),
            loss_grad_rel: self.loss_grad_rel.max(o.loss_grad_rel),
            params: self.params.max(o.params),
        }
    }
}

/// A random surrogate (depth ≤ 4, width ≤ 50) for one of [`CASES`].
pub fn random_surrogate(seed: u64) -> (RunConfig, BenchmarkCase, SurrogateField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (name, variant) = CASES[rng.gen_range(0..CASES.len())];
    let mut cfg = RunConfig::for_benchmark(name).unwrap();
    cfg.loss_variant = variant;
    cfg.hidden_layers = rng.gen_range(1..=4);
    cfg.width = rng.gen_range(1..=50);
    let case = cfg.validate().unwrap();
    let net = init_net(&cfg.layer_sizes(&case).unwrap(), rng.gen()).unwrap();
    let s = cfg.surrogate(&case, net).unwrap();
    (cfg, case, s)
}

/// Compares the jets of `û` and `∇·λ̂`, and the loss parameter gradient,
/// against finite differences for one random network.
///
/// Gradient errors are relative to `max_i |∂ᵢû|`, Laplacian and divergence
/// errors relative to `Σᵢ |∂ᵢᵢû|` (resp. `Σᵢ |∂ᵢλ̂ᵢ|`), so that a component
/// that happens to cancel is judged at the size of its terms. Loss-gradient
/// entries are relative to `max(|g_k|, 1e-3·max_k |g_k|)`.
pub fn derivative_check(seed: u64) -> DerivativeReport {
    let (cfg, case, mut s) = random_surrogate(seed);
    let d = case.dim();
    let h = 1e-3;
    let mut rep = DerivativeReport {
        params: s.net.param_count(),
        ..Default::default()
    };

    let pts = case.domain.sample_interior(40, seed ^ 0xabc);
    let mut used = 0;
    for x in pts.iter() {
        // stencils must stay inside the domain and away from data seams
        if case.domain.boundary_distance(x) < 4.0 * h || case.seam_distance(x) < 4.0 * h {
            continue;
        }
        used += 1;
        let jet = s.eval_u(x).unwrap();
        let gscale = jet.grad.iter().fold(1e-300f64, |m, g| m.max(g.abs()));
        let hscale: f64 = jet.hess_diag.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        let mut lap_fd = 0.0;
        for i in 0..d {
            let f = |t: f64| s.eval_u(&along(x, i, t)).unwrap().value;
            let g_fd = d1(&f, x[i], h);
            rep.grad_rel = rep.grad_rel.max((g_fd - jet.grad[i]).abs() / gscale);
            lap_fd += d2(&f, x[i], h);
        }
        rep.lap_rel = rep.lap_rel.max((lap_fd - jet.laplacian()).abs() / hscale);

        if d == 2 && s.net.output_dim() == d + 1 {
            let lam = s.eval_lambda(x).unwrap();
            let div: f64 = (0..d).map(|i| lam[i].grad[i]).sum();
            let dscale: f64 = (0..d).map(|i| lam[i].grad[i].abs()).sum::<f64>().max(1e-300);
            let mut div_fd = 0.0;
            for i in 0..d {
                let f = |t: f64| s.eval_lambda(&along(x, i, t)).unwrap()[i].value;
                div_fd += d1(&f, x[i], h);
            }
            rep.div_rel = rep.div_rel.max((div_fd - div).abs() / dscale);
        }
    }
    assert!(used > 0, "no usable points for seed {seed}");

    let problem = cfg.problem(&case).unwrap();
    let train = case.training_set(cfg.loss_variant, 12, seed).unwrap();
    let eval = loss_total(&problem, &s, &train).unwrap();
    let g = eval.grad.as_slice().to_vec();
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let hp = 1e-4;
    for _ in 0..40 {
        let k = rng.gen_range(0..g.len());
        let p0 = s.net.params()[k];
        let mut at = |t: f64| {
            s.net.params_mut()[k] = t;
            loss_total(&problem, &s, &train).unwrap().loss
        };
        let fd = (-at(p0 + 2.0 * hp) + 8.0 * at(p0 + hp) - 8.0 * at(p0 - hp) + at(p0 - 2.0 * hp)) / (12.0 * hp);
        s.net.params_mut()[k] = p0;
        let denom = g[k].abs().max(1e-3 * gmax).max(1e-300);
        rep.loss_grad_rel = rep.loss_grad_rel.max((fd - g[k]).abs() / denom);
    }
    rep
}

/// Largest distance between an operator and the brute-force grid minimizer
/// of its defining objective over `count` random inputs, in units of the
/// local grid cell (the step in 1D, the polar cell diameter in 2D).
/// Returns `[clamp, soft, ball, shrink]`.
pub fn prox_oracle(count: usize, seed: u64) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];

    let step1 = 1e-4;
    let grid1: Vec<f64> = (0..=100_000).map(|k| -5.0 + k as f64 * step1).collect();
    let argmin1 = |obj: &dyn Fn(f64) -> f64| {
        grid1
            .iter()
            .copied()
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap()
    };

    // Polar grid: 401 radii from 0 to `rmax` and 400 angles, so the unit
    // circle is a grid line. Returns the minimizer and the local cell size.
    let argmin2 = |rmax: f64, obj: &dyn Fn(f64, f64) -> f64| {
        let (nr, nt) = (401, 400);
        let dr = rmax / (nr - 1) as f64;
        let dt = std::f64::consts::TAU / nt as f64;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..nr {
            for j in 0..nt {
                let (r, t) = (i as f64 * dr, j as f64 * dt);
                let (a, b) = (r * t.cos(), r * t.sin());
                let v = obj(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        ((best.1, best.2), dr, dt)
    };
    let cell = |dr: f64, dt: f64, p: &[f64]| dr.hypot(p[0].hypot(p[1]) * dt);

    for _ in 0..count {
        let eta = rng.gen_range(0.05..2.0);

        let (w, psi) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        let obj = |v: f64| if v >= psi { (v - w).powi(2) / (2.0 * eta) } else { f64::INFINITY };
        worst[0] = worst[0].max((argmin1(&obj) - obstacle_clamp(w, psi)).abs() / step1);

        let tau = rng.gen_range(0.0..2.0);
        let w = rng.gen_range(-4.0..4.0);
        let obj = |v: f64| tau * v.abs() + (v - w).powi(2) / (2.0 * eta);
        let exact = soft_threshold(w, tau * eta).unwrap();
        worst[1] = worst[1].max((argmin1(&obj) - exact).abs() / step1);

        let q = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let obj = |a: f64, b: f64| {
            if a.hypot(b) <= 1.0 {
                ((a - q[0]).powi(2) + (b - q[1]).powi(2)) / (2.0 * eta)
            } else {
                f64::INFINITY
            }
        };
        let ((a, b), dr, dt) = argmin2(2.0, &obj);
        let p = unit_ball_project(&q);
        worst[2] = worst[2].max((a - p[0]).hypot(b - p[1]) / cell(dr, dt, &p));

        let w = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let obj = |a: f64, b: f64| tau * a.hypot(b) + ((a - w[0]).powi(2) + (b - w[1]).powi(2)) / (2.0 * eta);
        let ((a, b), dr, dt) = argmin2(4.5, &obj);
        let p = vector_shrink(&w, tau * eta).unwrap();
        worst[3] = worst[3].max((a - p[0]).hypot(b - p[1]) / cell(dr, dt, &p));
    }
    worst
}

/// Largest pointwise residual component of the exact solution over
/// `count` interior points (and, for the friction problem, `count` contact
/// points) farther than `seam_gap` from any seam. Returns the maximum and
/// the number of points checked.
pub fn exact_residual_max(name: &str, variant: LossVariant, count: usize, seam_gap: f64, seed: u64) -> (f64, usize) {
    let case = BenchmarkCase::from_name(name).unwrap();
    let problem = case.problem(1e-3, variant).unwrap();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut draw = seed;
    while checked < count {
        let pts = case.domain.sample_interior(count, draw);
        draw += 1;
        for x in pts.iter() {
            if checked == count {
                break;
            }
            if case.seam_distance(x) <= seam_gap {
                continue;
            }
            let r = case.exact_residuals(&problem, x, None).unwrap();
            worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
            checked += 1;
        }
    }
    if let Some(seg) = case.contact {
        let pts = case.domain.sample_boundary(seg, count, seed ^ 1).unwrap();
        for i in 0..pts.len() {
            let r = case.exact_residuals(&problem, pts.point(i), pts.normal(i)).unwrap();
            worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
            checked += 1;
        }
    }
    (worst, checked)
}
