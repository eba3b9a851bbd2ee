//! Truncated concave covering objective on the neighbor graph and its greedy
//! minimum-cardinality cover.
//!
//! For a set `S ⊆ V` let `Γ(S)` be the union of its edge targets. The score of
//! positive bag `B` is `g(min(t, |Γ(S) ∩ B|))` and the total score `F(S)` is
//! the sum over positive bags. `F` is nondecreasing and submodular, so the
//! greedy rule (add the node with the largest marginal gain until
//! `F(S) ≥ α·F(V)`) carries the usual logarithmic cover guarantee.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{euclidean, BipartiteGraph, InstanceRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcaveFn {
    Identity,
    Sqrt,
    Log1p,
}

impl ConcaveFn {
    pub fn eval(self, a: u32) -> f64 {
        let a = f64::from(a);
        match self {
            ConcaveFn::Identity => a,
            ConcaveFn::Sqrt => a.sqrt(),
            ConcaveFn::Log1p => a.ln_1p(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConcaveFn::Identity => "identity",
            ConcaveFn::Sqrt => "sqrt",
            ConcaveFn::Log1p => "log1p",
        }
    }
}

impl fmt::Display for ConcaveFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConcaveFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<ConcaveFn> {
        match s {
            "identity" | "id" => Ok(ConcaveFn::Identity),
            "sqrt" => Ok(ConcaveFn::Sqrt),
            "log1p" => Ok(ConcaveFn::Log1p),
            other => Err(Error::invalid(format!("unknown concave function {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverConfig {
    /// Covering threshold: at most `t` boxes per bag earn credit.
    pub t: u32,
    pub alpha: f64,
    pub g: ConcaveFn,
    /// Truncation parameter of the graph, used by [`approx_bound`].
    pub k: usize,
}

impl CoverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::invalid("covering threshold t must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        Ok(())
    }

    /// True for the `t = 1`, `g = identity` special case, where the problem is
    /// an ordinary minimum-cardinality cover of bags.
    pub fn is_min_cost_cover(&self) -> bool {
        self.t == 1 && self.g == ConcaveFn::Identity
    }

    fn score(&self, count: u32) -> f64 {
        self.g.eval(count.min(self.t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    /// Selected V nodes in selection order.
    pub selected: Vec<usize>,
    pub selected_refs: Vec<InstanceRef>,
    /// Realized marginal gain of every selection step.
    pub gains: Vec<f64>,
    pub f_final: f64,
    pub f_total: f64,
    /// Covered U nodes, per positive bag id.
    pub covered: BTreeMap<u64, Vec<InstanceRef>>,
}

/// Per-bag neighborhood counts of a growing selection.
struct Coverage<'a> {
    graph: &'a BipartiteGraph,
    cfg: &'a CoverConfig,
    covered: Vec<bool>,
    counts: Vec<u32>,
}

impl<'a> Coverage<'a> {
    fn new(graph: &'a BipartiteGraph, cfg: &'a CoverConfig) -> Self {
        Coverage {
            graph,
            cfg,
            covered: vec![false; graph.n_nodes()],
            counts: vec![0; graph.n_bags()],
        }
    }

    fn value(&self) -> f64 {
        self.counts.iter().map(|&c| self.cfg.score(c)).sum()
    }

    /// `F(S ∪ {v}) − F(S)`, summed over touched bags in edge order.
    fn gain(&self, v: usize) -> f64 {
        let mut touched: Vec<(usize, u32)> = Vec::new();
        for &u in &self.graph.edges[v] {
            if self.covered[u] {
                continue;
            }
            let b = self.graph.node_bag[u];
            match touched.iter_mut().find(|(tb, _)| *tb == b) {
                Some((_, inc)) => *inc += 1,
                None => touched.push((b, 1)),
            }
        }
        touched
            .iter()
            .map(|&(b, inc)| {
                let c = self.counts[b];
                self.cfg.score(c + inc) - self.cfg.score(c)
            })
            .sum()
    }

    fn add(&mut self, v: usize) {
        for &u in &self.graph.edges[v] {
            if !self.covered[u] {
                self.covered[u] = true;
                self.counts[self.graph.node_bag[u]] += 1;
            }
        }
    }

    fn covered_map(&self) -> BTreeMap<u64, Vec<InstanceRef>> {
        let mut map: BTreeMap<u64, Vec<InstanceRef>> = BTreeMap::new();
        for (u, &c) in self.covered.iter().enumerate() {
            if c {
                let bag = self.graph.bag_ids[self.graph.node_bag[u]];
                map.entry(bag).or_default().push(self.graph.nodes[u]);
            }
        }
        map.values_mut().for_each(|v| v.sort());
        map
    }
}

fn neighborhood_counts(s: &[usize], graph: &BipartiteGraph) -> Vec<u32> {
    let mut seen = vec![false; graph.n_nodes()];
    let mut counts = vec![0u32; graph.n_bags()];
    for &v in s {
        for &u in &graph.edges[v] {
            if !seen[u] {
                seen[u] = true;
                counts[graph.node_bag[u]] += 1;
            }
        }
    }
    counts
}

/// Covering score of one positive bag.
pub fn cover_score(s: &[usize], graph: &BipartiteGraph, bag_id: u64, cfg: &CoverConfig) -> Result<f64> {
    let b = graph.bag_index(bag_id).ok_or(Error::UnknownBag(bag_id))?;
    Ok(cfg.score(neighborhood_counts(s, graph)[b]))
}

/// `F(S)`: sum of the covering scores over all positive bags.
pub fn total_cover(s: &[usize], graph: &BipartiteGraph, cfg: &CoverConfig) -> f64 {
    neighborhood_counts(s, graph)
        .iter()
        .map(|&c| cfg.score(c))
        .sum()
}

fn all_nodes(graph: &BipartiteGraph) -> Vec<usize> {
    (0..graph.n_nodes()).collect()
}

fn finish(cov: Coverage<'_>, selected: Vec<usize>, gains: Vec<f64>, f_total: f64) -> CoverResult {
    CoverResult {
        selected_refs: selected.iter().map(|&v| cov.graph.nodes[v]).collect(),
        f_final: cov.value(),
        covered: cov.covered_map(),
        selected,
        gains,
        f_total,
    }
}

#[derive(Debug, PartialEq)]
struct HeapEntry {
    gain: f64,
    node: usize,
    /// Selection step at which `gain` was computed.
    step: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy cover with lazy (priority-queue) gain updates.
///
/// Stale gains are upper bounds by submodularity, so a node whose gain is
/// fresh for the current step and sits on top of the heap is the exact
/// greedy choice. Ties go to the lowest node id.
pub fn greedy_cover(graph: &BipartiteGraph, cfg: &CoverConfig) -> Result<CoverResult> {
    cfg.validate()?;
    let f_total = total_cover(&all_nodes(graph), graph, cfg);
    let target = cfg.alpha * f_total;
    let mut cov = Coverage::new(graph, cfg);
    let mut selected = Vec::new();
    let mut gains = Vec::new();
    if target <= 0.0 {
        return Ok(finish(cov, selected, gains, f_total));
    }
    let mut heap: BinaryHeap<HeapEntry> = (0..graph.n_nodes())
        .map(|v| HeapEntry {
            gain: cov.gain(v),
            node: v,
            step: 0,
        })
        .collect();
    let mut f_current = 0.0;
    while f_current < target {
        let Some(top) = heap.pop() else { break };
        let step = selected.len();
        if top.step != step {
            heap.push(HeapEntry {
                gain: cov.gain(top.node),
                node: top.node,
                step,
            });
            continue;
        }
        if top.gain <= 0.0 {
            break;
        }
        cov.add(top.node);
        selected.push(top.node);
        gains.push(top.gain);
        f_current = cov.value();
    }
    Ok(finish(cov, selected, gains, f_total))
}

/// Greedy cover re-evaluating every candidate at every step. Reference
/// implementation for [`greedy_cover`].
pub fn naive_greedy_cover(graph: &BipartiteGraph, cfg: &CoverConfig) -> Result<CoverResult> {
    cfg.validate()?;
    let f_total = total_cover(&all_nodes(graph), graph, cfg);
    let target = cfg.alpha * f_total;
    let mut cov = Coverage::new(graph, cfg);
    let mut selected = Vec::new();
    let mut gains = Vec::new();
    let mut chosen = vec![false; graph.n_nodes()];
    let mut f_current = 0.0;
    while target > 0.0 && f_current < target {
        let mut best: Option<(usize, f64)> = None;
        for v in (0..graph.n_nodes()).filter(|&v| !chosen[v]) {
            let g = cov.gain(v);
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((v, g));
            }
        }
        match best {
            Some((v, g)) if g > 0.0 => {
                chosen[v] = true;
                cov.add(v);
                selected.push(v);
                gains.push(g);
                f_current = cov.value();
            }
            _ => break,
        }
    }
    Ok(finish(cov, selected, gains, f_total))
}

pub const BRUTE_FORCE_MAX_NODES: usize = 20;

/// Exact minimum-cardinality cover by enumerating subsets in increasing size
/// and, within a size, in lexicographic order.
pub fn brute_force_cover(graph: &BipartiteGraph, cfg: &CoverConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let n = graph.n_nodes();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::SizeGuard {
            nodes: n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let target = cfg.alpha * total_cover(&all_nodes(graph), graph, cfg);
    for size in 0..=n {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            if total_cover(&idx, graph, cfg) >= target {
                return Ok(idx);
            }
            // next combination in lexicographic order
            let Some(i) = (0..size).rev().find(|&i| idx[i] != i + n - size) else {
                break;
            };
            idx[i] += 1;
            for j in i + 1..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(all_nodes(graph))
}

/// Approximation factor `1 + ln(k·g(1) / (g(t) − g(t−1)))` of the greedy cover.
pub fn approx_bound(cfg: &CoverConfig) -> Result<f64> {
    if cfg.k == 0 || cfg.t == 0 {
        return Err(Error::invalid("k and t must be at least 1"));
    }
    let last = cfg.g.eval(cfg.t) - cfg.g.eval(cfg.t - 1);
    if !(last > 0.0) {
        return Err(Error::DegenerateConcave { t: cfg.t });
    }
    Ok(1.0 + (cfg.k as f64 * cfg.g.eval(1) / last).ln())
}

/// Cluster `i` is the `i`-th selected node together with its neighborhood
/// `Γ({v_i})`. These instances form the initial positive training set.
pub fn extract_positives(
    result: &CoverResult,
    graph: &BipartiteGraph,
    n_clusters: usize,
) -> Result<Vec<BTreeSet<InstanceRef>>> {
    if n_clusters > result.selected.len() {
        return Err(Error::TooManyClusters {
            requested: n_clusters,
            available: result.selected.len(),
        });
    }
    Ok(result.selected[..n_clusters]
        .iter()
        .map(|&v| {
            std::iter::once(graph.nodes[v])
                .chain(graph.edges[v].iter().map(|&u| graph.nodes[u]))
                .collect()
        })
        .collect())
}

/// Negative-mining baseline: from every positive bag, the instance whose
/// nearest negative instance is farthest away. Ties go to the lowest id.
pub fn negative_mine(ds: &Dataset) -> Result<BTreeMap<u64, usize>> {
    let negatives: Vec<&[f64]> = ds
        .bags
        .iter()
        .filter(|b| !b.is_positive())
        .flat_map(|b| b.instances.iter().map(|i| i.features.as_slice()))
        .collect();
    if negatives.is_empty() {
        return Err(Error::invalid("negative mining needs at least one negative bag"));
    }
    let picks: Vec<(u64, usize)> = ds
        .bags
        .par_iter()
        .filter(|b| b.is_positive())
        .map(|bag| {
            let mut best = (bag.instances[0].id, f64::NEG_INFINITY);
            for inst in &bag.instances {
                let d = negatives
                    .iter()
                    .map(|n| euclidean(&inst.features, n))
                    .fold(f64::INFINITY, f64::min);
                if d > best.1 {
                    best = (inst.id, d);
                }
            }
            (bag.id, best.0)
        })
        .collect();
    Ok(picks.into_iter().collect())
}
