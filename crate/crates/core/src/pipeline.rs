//! Shared glue: how initial positives are chosen and which trainer runs.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cover::{self, ConcaveFn, CoverConfig, CoverResult};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{self, BipartiteGraph, InstanceRef};
use crate::lsvm::{train_initial_svm, train_lsvm_cccp, CccpReport, Model, PositiveSet, TrainConfig};
use crate::optim::OptReport;
use crate::smooth::{train_slsvm, SmoothConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSettings {
    pub k: usize,
    pub t: u32,
    pub alpha: f64,
    pub g: ConcaveFn,
    pub n_clusters: usize,
}

impl Default for CoverSettings {
    fn default() -> Self {
        CoverSettings {
            k: 10,
            t: 1,
            alpha: 0.9,
            g: ConcaveFn::Identity,
            n_clusters: 3,
        }
    }
}

impl CoverSettings {
    pub fn cover_config(&self) -> CoverConfig {
        CoverConfig {
            t: self.t,
            alpha: self.alpha,
            g: self.g,
            k: self.k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    pub graph: BipartiteGraph,
    pub result: CoverResult,
    /// Number of clusters actually used (at most the number selected).
    pub n_clusters: usize,
    pub clusters: Vec<BTreeSet<InstanceRef>>,
}

impl Discovery {
    /// Union of all clusters in ascending order.
    pub fn positives(&self) -> Vec<InstanceRef> {
        self.clusters
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Graph, greedy cover and cluster extraction. `n_clusters` is clamped to the
/// number of selected nodes.
pub fn discover(ds: &Dataset, settings: &CoverSettings) -> Result<Discovery> {
    let graph = graph::build_graph(ds, settings.k)?;
    let result = cover::greedy_cover(&graph, &settings.cover_config())?;
    let n_clusters = settings.n_clusters.min(result.selected.len());
    let clusters = cover::extract_positives(&result, &graph, n_clusters)?;
    Ok(Discovery {
        graph,
        result,
        n_clusters,
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    /// Bag-averaged positives.
    Bagavg,
    /// Positives discovered by the submodular cover.
    Cover(CoverSettings),
    /// One negative-mined instance per positive bag.
    Negmine,
}

impl InitMode {
    pub fn name(&self) -> &'static str {
        match self {
            InitMode::Bagavg => "bagavg",
            InitMode::Cover(_) => "cover",
            InitMode::Negmine => "negmine",
        }
    }
}

pub fn initial_positives(ds: &Dataset, mode: &InitMode) -> Result<PositiveSet> {
    match mode {
        InitMode::Bagavg => Ok(PositiveSet::BagAveraged),
        InitMode::Cover(settings) => {
            let found = discover(ds, settings)?;
            let pos = found.positives();
            if pos.is_empty() {
                return Err(Error::EmptyPositives);
            }
            Ok(PositiveSet::Instances(pos))
        }
        InitMode::Negmine => Ok(PositiveSet::Instances(
            cover::negative_mine(ds)?
                .into_iter()
                .map(|(b, i)| InstanceRef::new(b, i))
                .collect(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Svm,
    Lsvm,
    Slsvm,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Svm => "svm",
            Method::Lsvm => "lsvm",
            Method::Slsvm => "slsvm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "svm" => Ok(Method::Svm),
            "lsvm" => Ok(Method::Lsvm),
            "slsvm" => Ok(Method::Slsvm),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Everything one training run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: Model,
    pub initial: OptReport,
    pub lsvm: Option<CccpReport>,
    pub slsvm: Option<TrainReport>,
}

/// Initial positives, the initial classifier and, for the latent methods,
/// refinement from that classifier. `smooth` is only used by `Slsvm`.
pub fn train(
    ds: &Dataset,
    method: Method,
    init: &InitMode,
    cfg: &TrainConfig,
    smooth: &SmoothConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if method == Method::Slsvm {
        smooth.validate()?;
    }
    let positives = initial_positives(ds, init)?;
    let (model, initial) = train_initial_svm(ds, &positives, cfg)?;
    let mut out = TrainOutput {
        model,
        initial,
        lsvm: None,
        slsvm: None,
    };
    match method {
        Method::Svm => {}
        Method::Lsvm => {
            let (m, r) = train_lsvm_cccp(&out.model, ds, cfg)?;
            out.model = m;
            out.lsvm = Some(r);
        }
        Method::Slsvm => {
            let (m, r) = train_slsvm(&out.model, ds, smooth, &cfg.inner)?;
            out.model = m;
            out.slsvm = Some(r);
        }
    }
    if out.model.params().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("trained model has non-finite weights".into()));
    }
    Ok(out)
}
