mod common;

use prox_evi::diff_engine::{Jet2, Tape};
use prox_evi::network::init_net;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn network_jets_and_loss_gradient_match_differences(seed in any::<u64>()) {
        let r = common::derivative_check(seed);
        prop_assert!(r.grad_rel < 1e-5, "{r:?}");
        prop_assert!(r.lap_rel < 1e-4, "{r:?}");
        prop_assert!(r.div_rel < 1e-4, "{r:?}");
        prop_assert!(r.loss_grad_rel < 1e-5, "{r:?}");
    }

    #[test]
    fn raw_network_jets_match_differences(
        seed in any::<u64>(),
        x in prop::collection::vec(-1.5f64..1.5, 2),
        width in 1usize..30,
    ) {
        let net = init_net(&[2, width, width, 3], seed).unwrap();
        let out = net.eval_raw(&x).unwrap();
        let h = 1e-3;
        for (k, jet) in out.iter().enumerate() {
            for i in 0..2 {
                let f = |t: f64| {
                    let mut y = x.clone();
                    y[i] = t;
                    net.eval_raw(&y).unwrap()[k].value
                };
                let scale = jet.grad[i].abs().max(jet.hess_diag[i].abs()).max(1e-2);
                prop_assert!((common::d1(&f, x[i], h) - jet.grad[i]).abs() < 1e-8 * scale.max(1.0));
                prop_assert!((common::d2(&f, x[i], h) - jet.hess_diag[i]).abs() < 1e-6 * scale.max(1.0));
            }
        }
    }
}

#[test]
fn tape_matches_jet_chain_rule() {
    // d/dθ of the Laplacian of tanh(θ·x) at x: θ²·tanh'' ⇒ 2θ·t'' + θ²x·t'''
    let (theta, x) = (0.7, 0.4);
    let tape = Tape::new();
    let th = tape.leaf(theta);
    let input = Jet2::lift(&[x], 0).unwrap();
    let pre = Jet2 {
        value: th * input.value,
        grad: vec![th * input.grad[0]],
        hess_diag: vec![th * input.hess_diag[0]],
    };
    let lap = pre.tanh().laplacian();
    let adj = tape.backward(lap).unwrap();
    let f = |t: f64| {
        let j = Jet2::lift(&[x], 0).unwrap().scale(t).tanh();
        j.laplacian()
    };
    let fd = common::d1(&f, theta, 1e-4);
    assert!((adj.get(th) - fd).abs() < 1e-9 * fd.abs().max(1.0), "{} vs {fd}", adj.get(th));
}
