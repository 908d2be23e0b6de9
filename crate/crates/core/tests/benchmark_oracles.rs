mod common;

use std::f64::consts::{PI, SQRT_2};

use prox_evi::benchmarks::{BenchmarkCase, Segment, BETA_PRINTED, R_STAR_PRINTED};

// Closed forms written out independently of the library.

fn sym(x: f64) -> f64 {
    let s = 1.0 / (2.0 * SQRT_2);
    let y = if x >= 1.0 - s { 1.0 - x } else { x };
    if y < s {
        (100.0 - 50.0 * SQRT_2) * y
    } else {
        100.0 * y * (1.0 - y) - 12.5
    }
}

fn nonsym(x: f64) -> f64 {
    let s3 = 3f64.sqrt();
    let k = 4.0 - 2.0 * s3;
    if x < -2.0 + s3 {
        k * (x + 2.0)
    } else if x < 2.0 - s3 {
        1.0 - x * x
    } else {
        k * (2.0 - x)
    }
}

fn mu(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn phi(x: f64) -> f64 {
    let a = x.abs();
    mu(0.4 - a) / (mu(a - 0.3) + mu(0.4 - a))
}

fn psi_piecewise(x: f64) -> f64 {
    let y = if x <= 0.0 { x + 0.5 } else { x - 0.5 };
    phi(y) * (1.5 - 12.0 * y.abs().powf(2.0 - 0.4)) - 0.5
}

fn piecewise(x: f64) -> f64 {
    let b = BETA_PRINTED;
    if x < -b - 0.5 {
        psi_piecewise(-b - 0.5) * (x + 1.0) / (0.5 - b)
    } else if x < -0.5 {
        psi_piecewise(x)
    } else if x < 0.5 {
        1.0
    } else if x < 0.5 + b {
        psi_piecewise(x)
    } else {
        psi_piecewise(b + 0.5) * (x - 1.0) / (b - 0.5)
    }
}

fn obstacle2d(x: &[f64]) -> f64 {
    let r = x[0].hypot(x[1]);
    let rs = R_STAR_PRINTED;
    if r <= rs {
        (1.0 - r * r).sqrt()
    } else {
        -rs * rs * (r / 2.0).ln() / (1.0 - rs * rs).sqrt()
    }
}

fn torsion(x: &[f64], c: f64) -> f64 {
    let r = x[0].hypot(x[1]);
    if c <= 2.0 {
        c / 4.0 * (1.0 - r * r)
    } else if r >= 2.0 / c {
        1.0 - r
    } else {
        c / 4.0 * ((1.0 - r * r) - (1.0 - 2.0 / c).powi(2))
    }
}

fn bingham(x: &[f64], tau: f64) -> f64 {
    let c = 10.0;
    let rp = 2.0 * tau / c;
    let r = x[0].hypot(x[1]);
    if c <= 2.0 * tau {
        0.0
    } else if r <= rp {
        (1.0 - rp) / 2.0 * (c / 2.0 * (1.0 + rp) - 2.0 * tau)
    } else {
        (1.0 - r) / 2.0 * (c / 2.0 * (1.0 + r) - 2.0 * tau)
    }
}

fn friction(x: &[f64]) -> f64 {
    (x[0].sin() - x[0] * 1f64.sin()) * (2.0 * PI * x[1]).sin()
}

fn closed_form(name: &str) -> Box<dyn Fn(&[f64]) -> f64> {
    match name {
        "obstacle1d_sym" => Box::new(|x| sym(x[0])),
        "obstacle1d_nonsym" => Box::new(|x| nonsym(x[0])),
        "obstacle1d_piecewise" => Box::new(|x| piecewise(x[0])),
        "obstacle2d" => Box::new(obstacle2d),
        "torsion2d(c=1)" => Box::new(|x| torsion(x, 1.0)),
        "torsion2d(c=4)" => Box::new(|x| torsion(x, 4.0)),
        "bingham2d(tau=1)" => Box::new(|x| bingham(x, 1.0)),
        "bingham2d(tau=1.5)" => Box::new(|x| bingham(x, 1.5)),
        "friction2d" => Box::new(friction),
        _ => unreachable!(),
    }
}

const NAMES: [&str; 9] = [
    "obstacle1d_sym",
    "obstacle1d_nonsym",
    "obstacle1d_piecewise",
    "obstacle2d",
    "torsion2d(c=1)",
    "torsion2d(c=4)",
    "bingham2d(tau=1)",
    "bingham2d(tau=1.5)",
    "friction2d",
];

#[test]
fn exact_values_match_closed_forms() {
    for name in NAMES {
        let case = BenchmarkCase::from_name(name).unwrap();
        let u = closed_form(name);
        for x in case.domain.sample_interior(2000, 21).iter() {
            let got = case.exact_u(x).unwrap();
            assert!((got - u(x)).abs() < 1e-12 * u(x).abs().max(1.0), "{name} at {x:?}: {got} vs {}", u(x));
        }
    }
}

#[test]
fn exact_jets_match_differences() {
    let h = 1e-4;
    for name in NAMES {
        let case = BenchmarkCase::from_name(name).unwrap();
        let u = closed_form(name);
        for x in case.domain.sample_interior(300, 22).iter() {
            if case.seam_distance(x) < 1e-2 || case.domain.boundary_distance(x) < 1e-2 {
                continue;
            }
            let jet = case.exact_u_jet(x).unwrap();
            for i in 0..x.len() {
                let f = |t: f64| {
                    let mut y = x.to_vec();
                    y[i] = t;
                    u(&y)
                };
                let g = common::d1(&f, x[i], h);
                let hh = common::d2(&f, x[i], 1e-3);
                assert!((g - jet.grad[i]).abs() < 1e-7 * g.abs().max(1.0), "{name} grad at {x:?}");
                assert!((hh - jet.hess_diag[i]).abs() < 1e-4 * hh.abs().max(1.0), "{name} hess at {x:?}");
            }
        }
    }
}

#[test]
fn exact_solutions_have_vanishing_residuals() {
    for (name, variant) in common::CASES {
        let (worst, checked) = common::exact_residual_max(name, variant, 1000, 1e-3, 5);
        assert!(checked >= 1000);
        assert!(worst < 1e-8, "{name} {variant}: residual {worst:e}");
    }
}

#[test]
fn solutions_respect_obstacles() {
    for name in ["obstacle1d_sym", "obstacle1d_nonsym", "obstacle1d_piecewise", "obstacle2d"] {
        let case = BenchmarkCase::from_name(name).unwrap();
        for x in case.domain.sample_interior(10_000, 23).iter() {
            let (psi, _) = case.obstacle_and_source(x).unwrap();
            assert!(case.exact_u(x).unwrap() >= psi.unwrap() - 1e-12, "{name} at {x:?}");
        }
    }
}

#[test]
fn seams_are_continuous() {
    let s3 = 3f64.sqrt();
    let b = BETA_PRINTED;
    let seams: [(&str, Vec<f64>); 3] = [
        ("obstacle1d_sym", vec![1.0 / (2.0 * SQRT_2), 1.0 - 1.0 / (2.0 * SQRT_2)]),
        ("obstacle1d_nonsym", vec![-2.0 + s3, 2.0 - s3]),
        ("obstacle1d_piecewise", vec![-0.5 - b, -0.5, 0.5, 0.5 + b]),
    ];
    for (name, points) in seams {
        let case = BenchmarkCase::from_name(name).unwrap();
        for s in points {
            let jump = case.exact_u(&[s - 1e-9]).unwrap() - case.exact_u(&[s + 1e-9]).unwrap();
            assert!(jump.abs() < 1e-6, "{name} at {s}: jump {jump}");
        }
    }
    let case = BenchmarkCase::from_name("obstacle2d").unwrap();
    let r = R_STAR_PRINTED;
    let jump = case.exact_u(&[r - 1e-9, 0.0]).unwrap() - case.exact_u(&[r + 1e-9, 0.0]).unwrap();
    assert!(jump.abs() < 1e-6, "obstacle2d jump {jump}");
}

#[test]
fn torsion_gradient_bound() {
    for name in ["torsion2d(c=1)", "torsion2d(c=4)"] {
        let case = BenchmarkCase::from_name(name).unwrap();
        for x in case.domain.sample_interior(10_000, 24).iter() {
            let g = case.exact_u_jet(x).unwrap().grad;
            assert!(g[0].hypot(g[1]) <= 1.0 + 1e-9, "{name} at {x:?}");
        }
    }
}

#[test]
fn friction_multiplier_and_equilibrium() {
    let case = BenchmarkCase::from_name("friction2d").unwrap();
    let tau = case.tau().unwrap();
    let edge = case.domain.sample_boundary(Segment::Right, 1000, 25).unwrap();
    for i in 0..edge.len() {
        let x = edge.point(i);
        let n = edge.normal(i).unwrap();
        let jet = case.exact_u_jet(x).unwrap();
        let dn = jet.grad[0] * n[0] + jet.grad[1] * n[1];
        assert!(dn.abs() <= tau, "|∂u/∂n| = {dn} at {x:?}");
        assert!(jet.value.abs() < 1e-15);
    }
    for x in case.domain.sample_interior(1000, 26).iter() {
        let jet = case.exact_u_jet(x).unwrap();
        let au = -jet.laplacian() + jet.value;
        let (_, f) = case.obstacle_and_source(x).unwrap();
        assert!((au - f).abs() < 1e-10, "Au − f = {} at {x:?}", au - f);
    }
}

#[test]
fn boundary_data_matches_exact_boundary_values() {
    for name in NAMES {
        let case = BenchmarkCase::from_name(name).unwrap();
        let (h, g) = case.boundary_functions();
        let bdy = match case.domain.dim() {
            1 => case.domain.sample_boundary(Segment::All, 2, 0).unwrap(),
            _ => case.domain.sample_boundary(Segment::All, 400, 27).unwrap(),
        };
        for x in bdy.iter() {
            if case.contact.is_some() && x[0] == 1.0 {
                // contact edge: not a Dirichlet boundary
                assert!(h(x).value > 0.0 || x[1] == 0.0 || x[1] == 1.0);
                continue;
            }
            assert!(h(x).value.abs() < 1e-12, "{name}: h({x:?}) = {}", h(x).value);
            let u = case.exact_u(x).unwrap();
            assert!((g(x).value - u).abs() < 1e-12, "{name}: g({x:?}) = {} vs {u}", g(x).value);
        }
        for x in case.domain.sample_interior(200, 28).iter() {
            assert!(h(x).value > 0.0, "{name}: h vanishes inside at {x:?}");
        }
    }
}
