//! Independent oracles and random generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use covertrain::cover::{ConcaveFn, CoverConfig};
use covertrain::data::{Bag, Dataset, Label};
use covertrain::graph::BipartiteGraph;
use covertrain::lsvm::Model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Bags with ids `1..`, positives first, sizes in `1..=max_bag`.
pub fn random_dataset(rng: &mut ChaCha8Rng, n_pos: usize, n_neg: usize, max_bag: usize, dim: usize) -> Dataset {
    let mut bags = Vec::new();
    for i in 0..n_pos + n_neg {
        let label = if i < n_pos { Label::Positive } else { Label::Negative };
        let m = rng.random_range(1..=max_bag);
        let rows = (0..m).map(|_| random_vec(rng, dim, 2.0)).collect();
        bags.push(Bag::from_rows(i as u64 + 1, label, rows));
    }
    Dataset::new("random", dim, bags).unwrap()
}

pub fn random_model(rng: &mut ChaCha8Rng, dim: usize, use_bias: bool) -> Model {
    let mut p = random_vec(rng, dim + usize::from(use_bias), 1.0);
    if use_bias {
        let last = p.len() - 1;
        p[last] *= 0.5;
    }
    Model::from_params(&p, use_bias)
}

pub fn random_g(rng: &mut ChaCha8Rng) -> ConcaveFn {
    [ConcaveFn::Identity, ConcaveFn::Sqrt, ConcaveFn::Log1p][rng.random_range(0..3)]
}

/// A random bipartite graph over `n` nodes spread across up to 4 bags, with
/// at most `k` edges per node.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, k: usize) -> BipartiteGraph {
    let n_bags = rng.random_range(1..=4usize.min(n.max(1)));
    let mut node_bag: Vec<usize> = (0..n).map(|i| if i < n_bags { i } else { rng.random_range(0..n_bags) }).collect();
    node_bag.sort_unstable();
    let edges = (0..n)
        .map(|v| {
            let deg = rng.random_range(0..=k.min(n.saturating_sub(1)));
            let mut targets = BTreeSet::new();
            while targets.len() < deg {
                let u = rng.random_range(0..n);
                if node_bag[u] != node_bag[v] || rng.random_bool(0.2) {
                    targets.insert(u);
                }
            }
            targets.into_iter().collect()
        })
        .collect();
    BipartiteGraph::from_parts(k, node_bag, n_bags, edges).unwrap()
}

/// `F(S)` by explicit set arithmetic.
pub fn cover_oracle(s: &[usize], graph: &BipartiteGraph, cfg: &CoverConfig) -> f64 {
    let gamma: BTreeSet<usize> = s.iter().flat_map(|&v| graph.edges[v].iter().copied()).collect();
    (0..graph.n_bags())
        .map(|b| {
            let count = gamma.iter().filter(|&&u| graph.node_bag[u] == b).count() as u32;
            let a = f64::from(count.min(cfg.t));
            match cfg.g {
                ConcaveFn::Identity => a,
                ConcaveFn::Sqrt => a.sqrt(),
                ConcaveFn::Log1p => (1.0 + a).ln(),
            }
        })
        .sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Edge lists by exhaustive pairwise scan: for node `v`, the per-bag nearest
/// instances of all other bags, ranked by `(distance, bag_id)`, first `k`,
/// positive bags only. Returned as `(bag_id, instance_id)` pairs per node in
/// dataset order.
pub fn graph_oracle(ds: &Dataset, k: usize) -> Vec<Vec<(u64, usize)>> {
    let mut out = Vec::new();
    for bag in ds.bags.iter().filter(|b| b.is_positive()) {
        for inst in &bag.instances {
            let mut cands: Vec<(f64, u64, usize, bool)> = Vec::new();
            for other in ds.bags.iter().filter(|o| o.id != bag.id) {
                let mut best: Option<(f64, usize)> = None;
                for j in &other.instances {
                    let d = dist(&inst.features, &j.features);
                    let better = match best {
                        None => true,
                        Some((bd, bi)) => d < bd || (d == bd && j.id < bi),
                    };
                    if better {
                        best = Some((d, j.id));
                    }
                }
                let (d, j) = best.unwrap();
                cands.push((d, other.id, j, other.is_positive()));
            }
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            out.push(
                cands
                    .into_iter()
                    .take(k)
                    .filter(|c| c.3)
                    .map(|c| (c.1, c.2))
                    .collect(),
            );
        }
    }
    out
}

/// Projection onto the simplex by bisection on the KKT threshold `θ` with
/// `Σ max(vᵢ − θ, 0) = 1`.
pub fn kkt_projection(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (max - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = v.iter().map(|x| (x - mid).max(0.0)).sum();
        if s > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `μ·log Σ exp(sᵢ/μ)`, max-shifted.
pub fn lse(s: &[f64], mu: f64) -> f64 {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + mu * s.iter().map(|x| ((x - max) / mu).exp()).sum::<f64>().ln()
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖∞ / max(1, ‖b‖∞)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|x| x.abs()).fold(1.0, f64::max);
    diff / scale
}
