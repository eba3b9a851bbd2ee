//! Discriminative bipartite neighbor graph over the instances of positive bags.
//!
//! For every instance `v` of a positive bag we take the single nearest
//! instance of every *other* bag, positive or negative, and sort those
//! candidates by distance. `v` is linked to the candidates among the first `k`
//! that come from positive bags. Instances that look equally like positive and
//! negative data lose many of their top-`k` slots to negative bags and end up
//! with few or no edges.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceRef {
    pub bag_id: u64,
    pub instance_id: usize,
}

impl InstanceRef {
    pub fn new(bag_id: u64, instance_id: usize) -> Self {
        InstanceRef {
            bag_id,
            instance_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub bag_id: u64,
    pub instance_id: usize,
    pub distance: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborList {
    pub source: InstanceRef,
    /// One entry per other bag, ascending by `(distance, bag_id, instance_id)`.
    pub neighbors: Vec<Neighbor>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The instance of `bag` closest to `x`; ties go to the lowest instance id.
fn nearest_in_bag(x: &[f64], bag: &Bag) -> (usize, f64) {
    let mut best = (bag.instances[0].id, euclidean(x, &bag.instances[0].features));
    for inst in &bag.instances[1..] {
        let d = euclidean(x, &inst.features);
        if d < best.1 {
            best = (inst.id, d);
        }
    }
    best
}

pub fn nearest_per_bag(ds: &Dataset, source: InstanceRef) -> Result<NeighborList> {
    let bag = ds.bag(source.bag_id).ok_or(Error::UnknownBag(source.bag_id))?;
    if !bag.is_positive() {
        return Err(Error::invalid(format!(
            "source bag {} is not a positive bag",
            source.bag_id
        )));
    }
    let x = &bag
        .instances
        .get(source.instance_id)
        .ok_or_else(|| Error::invalid(format!("bag {} has no instance {}", source.bag_id, source.instance_id)))?
        .features;
    let mut neighbors: Vec<Neighbor> = ds
        .bags
        .iter()
        .filter(|b| b.id != source.bag_id)
        .map(|b| {
            let (instance_id, distance) = nearest_in_bag(x, b);
            Neighbor {
                bag_id: b.id,
                instance_id,
                distance,
                positive: b.is_positive(),
            }
        })
        .collect();
    neighbors.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.bag_id.cmp(&b.bag_id))
            .then(a.instance_id.cmp(&b.instance_id))
    });
    Ok(NeighborList { source, neighbors })
}

/// `G = (V, U, E)`. V and U are both the instances of the positive bags and
/// share one node index space (positive bags in dataset order, instances in
/// bag order). U is partitioned by positive bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub k: usize,
    pub nodes: Vec<InstanceRef>,
    /// Index of the positive bag (into `bag_ids`) that owns each node.
    pub node_bag: Vec<usize>,
    pub bag_ids: Vec<u64>,
    /// Edge targets in U for every node of V.
    pub edges: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Assembles a graph from raw parts, checking index ranges and `|edges(v)| ≤ k`.
    pub fn from_parts(
        k: usize,
        node_bag: Vec<usize>,
        n_bags: usize,
        edges: Vec<Vec<usize>>,
    ) -> Result<BipartiteGraph> {
        if node_bag.len() != edges.len() {
            return Err(Error::invalid("node_bag and edges differ in length"));
        }
        if node_bag.iter().any(|&b| b >= n_bags) {
            return Err(Error::invalid("node bag index out of range"));
        }
        for e in &edges {
            if e.len() > k {
                return Err(Error::invalid("node has more than k edges"));
            }
            if e.iter().any(|&u| u >= node_bag.len()) {
                return Err(Error::invalid("edge target out of range"));
            }
        }
        let mut counters = vec![0usize; n_bags];
        let nodes = node_bag
            .iter()
            .map(|&b| {
                let r = InstanceRef::new(b as u64, counters[b]);
                counters[b] += 1;
                r
            })
            .collect();
        Ok(BipartiteGraph {
            k,
            nodes,
            node_bag,
            bag_ids: (0..n_bags as u64).collect(),
            edges,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_bags(&self) -> usize {
        self.bag_ids.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges[v].len()
    }

    pub fn bag_index(&self, bag_id: u64) -> Option<usize> {
        self.bag_ids.iter().position(|&b| b == bag_id)
    }

    /// One line per edge: `v_bag:v_inst -> u_bag:u_inst dist`. Distances are
    /// only known for graphs built from data; pass them through `distances`.
    pub fn export_text(&self, distances: Option<&[Vec<f64>]>) -> String {
        let mut out = String::new();
        for (v, targets) in self.edges.iter().enumerate() {
            let src = self.nodes[v];
            for (j, &u) in targets.iter().enumerate() {
                let dst = self.nodes[u];
                let d = distances.map_or(f64::NAN, |ds| ds[v][j]);
                let _ = writeln!(
                    out,
                    "{}:{} -> {}:{} {}",
                    src.bag_id, src.instance_id, dst.bag_id, dst.instance_id, d
                );
            }
        }
        out
    }

    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            k: self.k,
            nodes: self.n_nodes(),
            edges: self.n_edges(),
            positive_bags: self.n_bags(),
            isolated_nodes: self.edges.iter().filter(|e| e.is_empty()).count(),
            max_degree: self.edges.iter().map(Vec::len).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub k: usize,
    pub nodes: usize,
    pub edges: usize,
    pub positive_bags: usize,
    pub isolated_nodes: usize,
    pub max_degree: usize,
}

/// A built graph together with the edge distances, for export.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltGraph {
    pub graph: BipartiteGraph,
    pub edge_distances: Vec<Vec<f64>>,
}

pub fn build_graph(ds: &Dataset, k: usize) -> Result<BipartiteGraph> {
    build_graph_with_distances(ds, k).map(|b| b.graph)
}

pub fn build_graph_with_distances(ds: &Dataset, k: usize) -> Result<BuiltGraph> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if ds.n_positive() < 2 {
        return Err(Error::invalid("graph construction needs at least 2 positive bags"));
    }
    let mut nodes = Vec::new();
    let mut node_bag = Vec::new();
    let mut bag_ids = Vec::new();
    let mut index: HashMap<InstanceRef, usize> = HashMap::new();
    for bag in ds.bags.iter().filter(|b| b.is_positive()) {
        let b = bag_ids.len();
        bag_ids.push(bag.id);
        for inst in &bag.instances {
            let r = InstanceRef::new(bag.id, inst.id);
            index.insert(r, nodes.len());
            nodes.push(r);
            node_bag.push(b);
        }
    }

    let lists: Vec<NeighborList> = nodes
        .par_iter()
        .map(|&v| nearest_per_bag(ds, v))
        .collect::<Result<_>>()?;

    let mut edges = Vec::with_capacity(nodes.len());
    let mut edge_distances = Vec::with_capacity(nodes.len());
    for list in &lists {
        let (targets, dists): (Vec<usize>, Vec<f64>) = list
            .neighbors
            .iter()
            .take(k)
            .filter(|n| n.positive)
            .map(|n| (index[&InstanceRef::new(n.bag_id, n.instance_id)], n.distance))
            .unzip();
        edges.push(targets);
        edge_distances.push(dists);
    }
    Ok(BuiltGraph {
        graph: BipartiteGraph {
            k,
            nodes,
            node_bag,
            bag_ids,
            edges,
        },
        edge_distances,
    })
}
