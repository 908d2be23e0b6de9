mod common;

use prox_evi::prox::{obstacle_clamp, soft_threshold, unit_ball_project, vector_shrink};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn operators_agree_with_grid_minimizers() {
    let worst = common::prox_oracle(100, 11);
    for (name, w) in ["clamp", "soft", "ball", "shrink"].iter().zip(worst) {
        assert!(w <= 1.0, "{name}: {w} cells from the grid minimizer");
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn operators_are_nonexpansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (psi, kappa) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..3.0));
        let slack = 1e-12;
        assert!((obstacle_clamp(a[0], psi) - obstacle_clamp(b[0], psi)).abs() <= (a[0] - b[0]).abs() + slack);
        let st = |w| soft_threshold(w, kappa).unwrap();
        assert!((st(a[0]) - st(b[0])).abs() <= (a[0] - b[0]).abs() + slack);
        assert!(dist(&unit_ball_project(&a), &unit_ball_project(&b)) <= dist(&a, &b) + slack);
        let vs = |w: &[f64]| vector_shrink(w, kappa).unwrap();
        assert!(dist(&vs(&a), &vs(&b)) <= dist(&a, &b) + slack);
    }
}

proptest! {
    #[test]
    fn soft_threshold_is_one_dimensional_shrink(w in -10.0f64..10.0, kappa in 0.0f64..5.0) {
        prop_assert_eq!(soft_threshold(w, kappa).unwrap(), vector_shrink(&[w], kappa).unwrap()[0]);
    }

    #[test]
    fn projection_lands_in_ball_and_is_idempotent(q in prop::collection::vec(-10.0f64..10.0, 1..4)) {
        let p = unit_ball_project(&q);
        prop_assert!(dist(&p, &vec![0.0; p.len()]) <= 1.0 + 1e-15);
        let pp = unit_ball_project(&p);
        prop_assert!(dist(&p, &pp) < 1e-15);
    }

    #[test]
    fn shrink_reduces_norm_by_kappa(w in prop::collection::vec(-10.0f64..10.0, 2), kappa in 0.0f64..5.0) {
        let s = vector_shrink(&w, kappa).unwrap();
        let n = dist(&w, &[0.0, 0.0]);
        let ns = dist(&s, &[0.0, 0.0]);
        prop_assert!((ns - (n - kappa).max(0.0)).abs() < 1e-12);
    }
}

#[test]
fn negative_thresholds_are_rejected() {
    assert!(soft_threshold(1.0, -0.1).is_err());
    assert!(vector_shrink(&[1.0, 0.0], -0.1).is_err());
}
