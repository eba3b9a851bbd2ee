mod common;

use covertrain::data::{Bag, Dataset, Label};
use covertrain::loss::LossKind;
use covertrain::lsvm::{latent_objective, Model};
use covertrain::smooth::{
    bag_gradient, project_simplex, project_simplex_pivot, slsvm_objective_grad, smoothed_bag, smoothed_max_with,
    top_n_scores, Omega, SmoothConfig,
};
use proptest::prelude::*;

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 1..50)
}

fn scfg(mu: f64, n_top: usize, omega: Omega, loss: LossKind) -> SmoothConfig {
    SmoothConfig {
        mu,
        n_top,
        omega,
        loss,
        c: 1.0,
    }
}

proptest! {
    #[test]
    fn projection_matches_kkt_oracle(v in scores()) {
        let u = project_simplex(&v).unwrap();
        let oracle = common::kkt_projection(&v);
        let pivot = project_simplex_pivot(&v).unwrap();
        for ((a, b), c) in u.iter().zip(&oracle).zip(&pivot) {
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((a - c).abs() < 1e-12);
            prop_assert!(*a >= 0.0);
        }
        prop_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] >= v[j] {
                    prop_assert!(u[i] >= u[j]);
                }
            }
        }
    }

    #[test]
    fn smoothing_gap_and_entropy(s in scores(), mu in 0.001..10.0f64) {
        let m = s.len() as f64;
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = smoothed_max_with(&s, mu, Omega::Euclidean).unwrap();
        prop_assert!(e.value >= max - mu / 2.0 - 1e-12);
        prop_assert!(e.value <= max - mu / (2.0 * m) + 1e-12);
        prop_assert!(e.value <= max);
        let h = smoothed_max_with(&s, mu, Omega::Entropy).unwrap();
        prop_assert!((h.value - common::lse(&s, mu)).abs() < 1e-12);
        let z: f64 = s.iter().map(|x| ((x - max) / mu).exp()).sum();
        for (i, w) in h.weights {
            prop_assert!((w - ((s[i] - max) / mu).exp() / z).abs() < 1e-15);
        }
    }

    #[test]
    fn support_shrinks_as_mu_decreases(s in scores()) {
        let mut last = usize::MAX;
        for mu in [100.0, 10.0, 1.0, 0.1, 0.01, 0.001] {
            let n = smoothed_max_with(&s, mu, Omega::Euclidean).unwrap().weights.len();
            prop_assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn vanishing_mu_recovers_max(s in scores()) {
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for mu in [1.0, 1e-3, 1e-6] {
            let v = smoothed_max_with(&s, mu, Omega::Euclidean).unwrap().value;
            prop_assert!((v - max).abs() <= mu / 2.0 + 1e-12);
        }
    }

    #[test]
    fn certified_top_n_is_bitwise_exact(seed in any::<u64>(), m in 2usize..15, mu in 0.01..2.0f64) {
        let mut rng = common::rng(seed);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| common::random_vec(&mut rng, 3, 2.0)).collect();
        let bag = Bag::from_rows(1, Label::Positive, rows);
        let model = common::random_model(&mut rng, 3, true);
        let full = smoothed_bag(&model, &bag, &scfg(mu, 0, Omega::Euclidean, LossKind::SquaredHinge)).unwrap();
        for n in 1..=m {
            let top = smoothed_bag(&model, &bag, &scfg(mu, n, Omega::Euclidean, LossKind::SquaredHinge)).unwrap();
            if n < m && top.certified == Some(true) {
                prop_assert!(top.weights.len() < n);
                prop_assert_eq!(&top.weights, &full.weights);
                prop_assert_eq!(top.value.to_bits(), full.value.to_bits());
                let a = bag_gradient(&bag, &top, 3);
                let b = bag_gradient(&bag, &full, 3);
                prop_assert_eq!(a, b);
            } else {
                prop_assert_eq!(&top.weights, &full.weights);
            }
        }
    }
}

#[test]
fn smoothed_max_examples() {
    let one = smoothed_max_with(&[3.0], 0.4, Omega::Euclidean).unwrap();
    assert_eq!(one.weights, vec![(0, 1.0)]);
    assert!((one.value - 2.8).abs() < 1e-15);
    let two = smoothed_max_with(&[2.0, 1.0], 1.0, Omega::Euclidean).unwrap();
    assert_eq!(two.dense(2), vec![1.0, 0.0]);
    assert_eq!(two.value, 1.5);
    let ent = smoothed_max_with(&[0.0, 0.0], 1.0, Omega::Entropy).unwrap();
    assert_eq!(ent.dense(2), vec![0.5, 0.5]);
    assert!((ent.value - 2f64.ln()).abs() < 1e-15);
    let p = project_simplex(&[1.0, 0.2, -0.1]).unwrap();
    let expected = [0.9, 0.1, 0.0];
    for (a, b) in p.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    // θ = 0.1 satisfies the KKT condition
    assert!(((1.0f64 - 0.1) + (0.2 - 0.1) - 1.0).abs() < 1e-15);
}

#[test]
fn top_scores_example() {
    let bag = Bag::from_rows(1, Label::Positive, vec![vec![5.0], vec![1.0], vec![0.0]]);
    let model = Model::from_params(&[1.0], false);
    let top = top_n_scores(&model, &bag, 2).unwrap();
    assert_eq!(top.indices, vec![0, 1]);
    assert_eq!(top.scores, vec![5.0, 1.0]);
    assert!(top_n_scores(&model, &bag, 4).is_err());
}

fn random_point(seed: u64) -> (Model, Dataset) {
    let mut rng = common::rng(seed);
    let ds = common::random_dataset(&mut rng, 3, 3, 5, 3);
    let model = common::random_model(&mut rng, 3, seed.is_multiple_of(2));
    (model, ds)
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..25 {
        let (model, ds) = random_point(seed);
        for omega in [Omega::Euclidean, Omega::Entropy] {
            for loss in [LossKind::SquaredHinge, LossKind::Logistic] {
                let cfg = scfg(0.5, 0, omega, loss);
                let ev = slsvm_objective_grad(&model, &ds, &cfg).unwrap();
                let f = |p: &[f64]| {
                    slsvm_objective_grad(&Model::from_params(p, model.use_bias()), &ds, &cfg)
                        .unwrap()
                        .value
                };
                let fd = common::fd_gradient(f, &model.params(), 1e-5);
                let err = common::rel_err(&ev.grad, &fd);
                assert!(err < 1e-5, "seed {seed} {omega} {loss}: {err}");
            }
        }
    }
}

#[test]
fn closed_form_at_zero() {
    let mut rng = common::rng(2);
    let ds = common::random_dataset(&mut rng, 4, 3, 6, 2);
    let mu = 0.3;
    let c = 2.0;
    let cfg = SmoothConfig {
        c,
        ..scfg(mu, 0, Omega::Euclidean, LossKind::SquaredHinge)
    };
    let ev = slsvm_objective_grad(&Model::zeros(2, true), &ds, &cfg).unwrap();
    let expected: f64 = ds
        .bags
        .iter()
        .map(|b| {
            let f = -mu / (2.0 * b.len() as f64);
            let y = b.label.sign();
            c * (1.0 - y * f).max(0.0).powi(2)
        })
        .sum();
    assert!((ev.value - expected).abs() < 1e-12, "{} vs {expected}", ev.value);
}

#[test]
fn tiny_mu_approaches_latent_objective() {
    for seed in 0..10 {
        let (model, ds) = random_point(seed);
        for loss in [LossKind::SquaredHinge, LossKind::Logistic] {
            let smooth = slsvm_objective_grad(&model, &ds, &scfg(1e-8, 0, Omega::Euclidean, loss))
                .unwrap()
                .value;
            let exact = latent_objective(&model, &ds, loss, 1.0).unwrap();
            assert!((smooth - exact).abs() < 1e-6, "{smooth} vs {exact}");
        }
    }
}

#[test]
fn truncated_objective_equals_full() {
    for seed in 0..20 {
        let (model, ds) = random_point(seed);
        let full = slsvm_objective_grad(&model, &ds, &scfg(0.05, 0, Omega::Euclidean, LossKind::SquaredHinge)).unwrap();
        let top = slsvm_objective_grad(&model, &ds, &scfg(0.05, 3, Omega::Euclidean, LossKind::SquaredHinge)).unwrap();
        assert_eq!(full.value.to_bits(), top.value.to_bits());
        assert_eq!(full.grad, top.grad);
    }
}
