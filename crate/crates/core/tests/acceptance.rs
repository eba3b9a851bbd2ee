//! Acceptance suite: one PASS/FAIL line per criterion at fixed tolerances.
//!
//! Set `COVERTRAIN_MUSK1=/path/to/musk1.csv` (dense-csv) to add the
//! informational musk1 cross-validation line.

mod common;

use std::time::Instant;

use covertrain::cover::{
    approx_bound, brute_force_cover, greedy_cover, naive_greedy_cover, negative_mine, total_cover, CoverConfig,
};
use covertrain::data::{load_dataset, synth_generate, Bag, Dataset, Format, GroundTruth, Label, SynthConfig};
use covertrain::eval::{cross_validate, CvConfig};
use covertrain::loss::LossKind;
use covertrain::lsvm::{train_initial_svm, train_lsvm_cccp, Model, PositiveSet, TrainConfig};
use covertrain::optim::{minimize, OptConfig};
use covertrain::pipeline::{discover, CoverSettings, InitMode, Method};
use covertrain::smooth::{
    bag_gradient, project_simplex, slsvm_objective_grad, smoothed_bag, smoothed_max_with, Omega, SmoothConfig,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn submodularity() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(100);
    let (mut checks, mut violations) = (0usize, 0usize);
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let k = rng.random_range(1..=5);
        let graph = common::random_graph(&mut rng, n, k);
        let cfg = CoverConfig {
            t: rng.random_range(1..=4),
            alpha: 1.0,
            g: common::random_g(&mut rng),
            k,
        };
        for _ in 0..20 {
            let v = rng.random_range(0..n);
            let t: Vec<usize> = (0..n).filter(|&x| x != v && rng.random_bool(0.6)).collect();
            let s: Vec<usize> = t.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            let f = |x: &[usize]| total_cover(x, &graph, &cfg);
            let plus = |x: &[usize]| {
                let mut y = x.to_vec();
                y.push(v);
                f(&y)
            };
            checks += 1;
            if plus(&s) - f(&s) < plus(&t) - f(&t) - 1e-12 || f(&s) > f(&t) + 1e-12 {
                violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 30.0,
        format!("{checks} chains, {violations} violations, {secs:.2}s"),
    )
}

/// Greedy guarantee and lazy/naive equivalence on the same 200 instances.
fn greedy() -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut rng = common::rng(200);
    let (mut bound_bad, mut coverage_bad, mut lazy_bad) = (0usize, 0usize, 0usize);
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let k = rng.random_range(1..=5);
        let graph = common::random_graph(&mut rng, n, k);
        let cfg = CoverConfig {
            t: rng.random_range(1..=3),
            alpha: [0.5, 0.9, 1.0][rng.random_range(0..3)],
            g: common::random_g(&mut rng),
            k,
        };
        let lazy = greedy_cover(&graph, &cfg).unwrap();
        let naive = naive_greedy_cover(&graph, &cfg).unwrap();
        let best = brute_force_cover(&graph, &cfg).unwrap();
        let bound = approx_bound(&cfg).unwrap().ceil();
        if lazy.f_final < cfg.alpha * lazy.f_total {
            coverage_bad += 1;
        }
        if lazy.selected.len() as f64 > bound * best.len() as f64 {
            bound_bad += 1;
        }
        if lazy.selected != naive.selected {
            lazy_bad += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        outcome(
            bound_bad + coverage_bad == 0 && secs < 120.0,
            format!("200 instances, {coverage_bad} coverage and {bound_bad} bound violations, {secs:.2}s"),
        ),
        outcome(lazy_bad == 0, format!("200 instances, {lazy_bad} mismatches")),
    )
}

fn projection() -> Outcome {
    let mut rng = common::rng(300);
    let (mut dist, mut member, mut order_bad) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..1000 {
        let m = rng.random_range(1..=50);
        let scale = rng.random_range(0.1..10.0);
        let v = common::random_vec(&mut rng, m, scale);
        let u = project_simplex(&v).unwrap();
        let oracle = common::kkt_projection(&v);
        for (a, b) in u.iter().zip(&oracle) {
            dist = dist.max((a - b).abs());
        }
        member = member.max((u.iter().sum::<f64>() - 1.0).abs());
        if u.iter().any(|&x| x < 0.0) {
            member = f64::INFINITY;
        }
        for i in 0..m {
            for j in 0..m {
                if v[i] >= v[j] && u[i] < u[j] {
                    order_bad += 1;
                }
            }
        }
    }
    outcome(
        dist < 1e-9 && member <= 1e-10 && order_bad == 0,
        format!("1000 vectors, max dist {dist:.2e}, max |sum-1| {member:.2e}, {order_bad} order violations"),
    )
}

fn smoothing_bounds() -> Outcome {
    let mut rng = common::rng(400);
    let (mut bad, mut ent) = (0usize, 0.0f64);
    for _ in 0..1000 {
        let m = rng.random_range(1..=30);
        let s = common::random_vec(&mut rng, m, 5.0);
        let mu = 10f64.powf(rng.random_range(-3.0..1.0));
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f = smoothed_max_with(&s, mu, Omega::Euclidean).unwrap().value;
        if f < max - mu / 2.0 - 1e-12 || f > max - mu / (2.0 * m as f64) + 1e-12 {
            bad += 1;
        }
        let h = smoothed_max_with(&s, mu, Omega::Entropy).unwrap().value;
        ent = ent.max((h - common::lse(&s, mu)).abs());
    }
    outcome(
        bad == 0 && ent <= 1e-12,
        format!("1000 vectors, {bad} gap violations, entropy max err {ent:.2e}"),
    )
}

fn gradients() -> Outcome {
    let mut rng = common::rng(500);
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in 0..100 {
        let (np, nn) = (rng.random_range(1..4), rng.random_range(1..4));
        let ds = common::random_dataset(&mut rng, np, nn, 5, 3);
        let model = common::random_model(&mut rng, 3, p % 2 == 0);
        let mu = 10f64.powf(rng.random_range(-1.0..0.5));
        for omega in [Omega::Euclidean, Omega::Entropy] {
            for loss in [LossKind::SquaredHinge, LossKind::Logistic] {
                let cfg = SmoothConfig {
                    mu,
                    n_top: 0,
                    omega,
                    loss,
                    c: 1.0,
                };
                let g = slsvm_objective_grad(&model, &ds, &cfg).unwrap().grad;
                let f = |x: &[f64]| {
                    slsvm_objective_grad(&Model::from_params(x, model.use_bias()), &ds, &cfg)
                        .unwrap()
                        .value
                };
                worst = worst.max(common::rel_err(&g, &common::fd_gradient(f, &model.params(), 1e-5)));
                count += 1;
            }
        }
    }
    outcome(worst < 1e-5, format!("{count} checks, max relative error {worst:.2e}"))
}

fn top_n() -> Outcome {
    let mut rng = common::rng(600);
    let (mut certified, mut mismatches) = (0usize, 0usize);
    for _ in 0..200 {
        let m = rng.random_range(2..=30);
        let rows = (0..m).map(|_| common::random_vec(&mut rng, 4, 1.0)).collect();
        let bag = Bag::from_rows(1, Label::Positive, rows);
        let model = common::random_model(&mut rng, 4, true);
        let mu = 10f64.powf(rng.random_range(-2.0..0.0));
        let n = rng.random_range(1..m);
        let cfg = |n_top| SmoothConfig {
            mu,
            n_top,
            omega: Omega::Euclidean,
            loss: LossKind::SquaredHinge,
            c: 1.0,
        };
        let top = smoothed_bag(&model, &bag, &cfg(n)).unwrap();
        if top.certified == Some(true) {
            certified += 1;
            let full = smoothed_bag(&model, &bag, &cfg(0)).unwrap();
            if bag_gradient(&bag, &top, 4) != bag_gradient(&bag, &full, 4) || top.value != full.value {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && certified > 0,
        format!("200 bags, {certified} certified, {mismatches} gradient mismatches"),
    )
}

fn cccp() -> Outcome {
    let mut rng = common::rng(700);
    let (mut runs, mut worst) = (0usize, f64::NEG_INFINITY);
    let mut datasets: Vec<Dataset> = (0..20)
        .map(|_| common::random_dataset(&mut rng, 5, 5, 5, 3))
        .collect();
    datasets.push(synth_generate(&SynthConfig::default()).unwrap().0);
    for ds in &datasets {
        for bias in [false, true] {
            for c in [0.1, 1.0, 10.0] {
                let cfg = TrainConfig {
                    c,
                    use_bias: bias,
                    ..TrainConfig::default()
                };
                let (init, _) = train_initial_svm(ds, &PositiveSet::BagAveraged, &cfg).unwrap();
                let (_, report) = train_lsvm_cccp(&init, ds, &cfg).unwrap();
                runs += 1;
                for w in report.trace.windows(2) {
                    worst = worst.max(w[1] - w[0]);
                }
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{runs} runs, largest step increase {worst:.2e}"),
    )
}

fn optimizer() -> Outcome {
    let a = [3.0, -1.0, 0.5, 7.0];
    let (x, rep) = minimize(
        |x| {
            let r: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
            (0.5 * r.iter().map(|v| v * v).sum::<f64>(), r)
        },
        &[0.0; 4],
        &OptConfig::default(),
    )
    .unwrap();
    let qerr = x.iter().zip(&a).map(|(x, a)| (x - a).abs()).fold(0.0, f64::max);
    let rosen = |x: &[f64]| {
        let (p, q) = (x[0], x[1]);
        (
            (1.0 - p).powi(2) + 100.0 * (q - p * p).powi(2),
            vec![-2.0 * (1.0 - p) - 400.0 * p * (q - p * p), 200.0 * (q - p * p)],
        )
    };
    let (r, rrep) = minimize(
        rosen,
        &[-1.2, 1.0],
        &OptConfig {
            grad_tol: 1e-10,
            max_iters: 2000,
            ..OptConfig::default()
        },
    )
    .unwrap();
    let rerr = (r[0] - 1.0).abs().max((r[1] - 1.0).abs());
    outcome(
        qerr < 1e-8 && rep.iterations <= 3 && rerr < 1e-6,
        format!(
            "quadratic err {qerr:.1e} in {} iterations; Rosenbrock err {rerr:.1e} in {} iterations",
            rep.iterations, rrep.iterations
        ),
    )
}

fn purity(positives: &[covertrain::graph::InstanceRef], truth: &GroundTruth) -> f64 {
    let hits = positives.iter().filter(|r| truth.is_signal(r.bag_id, r.instance_id)).count();
    hits as f64 / positives.len().max(1) as f64
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let (ds, truth) = synth_generate(&SynthConfig::default()).unwrap();
    // k reaches every positive bag, so one cluster can span all signals
    let settings = CoverSettings {
        k: 40,
        ..CoverSettings::default()
    };
    let found = discover(&ds, &settings).unwrap();
    let positives = found.positives();
    let pur = purity(&positives, &truth);
    let recalled = truth
        .signal
        .iter()
        .filter(|(&b, &i)| positives.contains(&covertrain::graph::InstanceRef::new(b, i)))
        .count();

    // held-out accuracy: 10 folds, fixed hyperparameters, cover init on each
    // training fold, standardization from training statistics
    let cfg = CvConfig {
        methods: vec![Method::Slsvm],
        bias_variants: vec![true],
        c_grid: vec![1.0],
        mu_grid: vec![0.1],
        k: 10,
        init: InitMode::Cover(settings),
        ..CvConfig::default()
    };
    let report = cross_validate(&ds, &cfg).unwrap();
    let acc = report.cells[0].mean.unwrap_or(0.0);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        acc >= 95.0 && recalled * 10 >= truth.signal.len() * 9 && pur >= 0.9 && secs < 60.0,
        format!(
            "held-out accuracy {acc:.1}% (10-fold, C=1, mu=0.1, bias, k=40); {recalled}/{} signals recalled, \
             {} extracted, purity {:.1}%; {secs:.1}s",
            truth.signal.len(),
            positives.len(),
            100.0 * pur
        ),
    )
}

fn baseline_contrast() -> Outcome {
    let (ds, truth) = synth_generate(&SynthConfig {
        clutter_sep: 8.0,
        ..SynthConfig::default()
    })
    .unwrap();
    let cover = purity(&discover(&ds, &CoverSettings::default()).unwrap().positives(), &truth);
    let mined: Vec<_> = negative_mine(&ds)
        .unwrap()
        .into_iter()
        .map(|(b, i)| covertrain::graph::InstanceRef::new(b, i))
        .collect();
    let neg = purity(&mined, &truth);
    outcome(
        cover > neg,
        format!("cover purity {:.1}% vs negative mining {:.1}%", 100.0 * cover, 100.0 * neg),
    )
}

fn musk1() -> Option<Outcome> {
    let path = std::env::var("COVERTRAIN_MUSK1").ok()?;
    let ds = match load_dataset(&path, Format::DenseCsv) {
        Ok(ds) => ds,
        Err(e) => return Some(outcome(false, format!("cannot load {path}: {e}"))),
    };
    let cfg = CvConfig {
        methods: vec![Method::Slsvm],
        bias_variants: vec![false],
        ..CvConfig::default()
    };
    Some(match cross_validate(&ds, &cfg) {
        Ok(r) => {
            let best = r.best_for(Method::Slsvm, false).cloned();
            let (m, s) = best.and_then(|c| c.mean.zip(c.std)).unwrap_or((f64::NAN, f64::NAN));
            outcome(
                (m - 80.3).abs() <= 10.0,
                format!(
                    "{} bags, {} instances, d={}; best SLSVM w/o bias {m:.1} ± {s:.1} (reference 80.3 ± 10.3)",
                    ds.bags.len(),
                    ds.n_instances(),
                    ds.dim
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    })
}

fn main() {
    // libtest arguments such as --nocapture are accepted and ignored
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let (greedy_bound, lazy) = greedy();
    let results: Vec<(&str, Outcome, bool)> = vec![
        ("submodularity", submodularity(), true),
        ("greedy guarantee", greedy_bound, true),
        ("lazy equals naive greedy", lazy, true),
        ("simplex projection", projection(), true),
        ("smoothing bounds", smoothing_bounds(), true),
        ("gradient checks", gradients(), true),
        ("top-N exactness", top_n(), true),
        ("CCCP monotonicity", cccp(), true),
        ("optimizer", optimizer(), true),
        ("end-to-end synthetic", end_to_end(), true),
        ("baseline contrast", baseline_contrast(), true),
    ];
    let mut failed = 0;
    for (name, o, gating) in &results {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if *gating && !o.pass {
            failed += 1;
        }
    }
    match musk1() {
        Some(o) => println!(
            "INFO musk1 ({}): {}",
            if o.pass { "consistent" } else { "inconsistent" },
            o.detail
        ),
        None => println!("INFO musk1: skipped (COVERTRAIN_MUSK1 not set)"),
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
