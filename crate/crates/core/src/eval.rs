//! Bag-level accuracy and k-fold cross-validation over `(C, μ)` grids.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::lsvm::{decision, train_initial_svm, train_lsvm_cccp, Model, TrainConfig};
use crate::optim::OptConfig;
use crate::pipeline::{initial_positives, InitMode, Method};
use crate::smooth::{train_slsvm, Omega, SmoothConfig};

/// Percentage of bags whose decision matches their label.
pub fn bag_accuracy(model: &Model, ds: &Dataset) -> Result<f64> {
    if ds.bags.is_empty() {
        return Err(Error::EmptyDataset);
    }
    model.check_dim(ds.dim)?;
    let mut correct = 0usize;
    for bag in &ds.bags {
        if decision(model, bag)?.label == bag.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / ds.bags.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub methods: Vec<Method>,
    pub bias_variants: Vec<bool>,
    pub c_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub k: usize,
    pub seed: u64,
    pub init: InitMode,
    /// Loss of the latent SVM (inner solves use its smooth surrogate).
    pub lsvm_loss: LossKind,
    pub smooth_loss: LossKind,
    pub omega: Omega,
    pub n_top: usize,
    pub max_outer: usize,
    pub outer_tol: f64,
    pub opt: OptConfig,
    /// Center and normalize with training-fold statistics.
    pub standardize: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            methods: vec![Method::Lsvm, Method::Slsvm],
            bias_variants: vec![false, true],
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            mu_grid: vec![0.01, 0.1, 1.0, 10.0],
            k: 10,
            seed: 0,
            init: InitMode::Bagavg,
            lsvm_loss: LossKind::Hinge,
            smooth_loss: LossKind::SquaredHinge,
            omega: Omega::Euclidean,
            n_top: 0,
            max_outer: 50,
            outer_tol: 1e-6,
            opt: OptConfig::default(),
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub method: Method,
    pub bias: bool,
    pub c: f64,
    /// Smoothing parameter; only set for the smoothed method.
    pub mu: Option<f64>,
    pub fold_accuracies: Vec<f64>,
    /// Mean and standard deviation over all `k` folds; absent if any fold failed.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset: String,
    pub k: usize,
    pub seed: u64,
    pub init: String,
    pub cells: Vec<CvCell>,
    /// Index into `cells` of the highest mean accuracy.
    pub best: Option<usize>,
}

/// Sample standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

type CellKey = (Method, bool, usize, Option<usize>);
type Outcome = std::result::Result<f64, String>;

/// Runs every `(method, bias, C, μ)` cell on every fold. Within a fold and a
/// `(bias, C)` pair all methods start from the same initial model.
pub fn cross_validate(ds: &Dataset, cfg: &CvConfig) -> Result<CvReport> {
    if cfg.methods.is_empty() || cfg.bias_variants.is_empty() || cfg.c_grid.is_empty() {
        return Err(Error::invalid("empty method, bias or C grid"));
    }
    if cfg.methods.contains(&Method::Slsvm) && cfg.mu_grid.is_empty() {
        return Err(Error::invalid("empty mu grid"));
    }
    let split = kfold_split(ds, cfg.k, cfg.seed)?;
    let jobs: Vec<(usize, bool, usize)> = (0..cfg.k)
        .flat_map(|f| {
            cfg.bias_variants
                .iter()
                .flat_map(move |&b| (0..cfg.c_grid.len()).map(move |c| (f, b, c)))
        })
        .collect();

    let outcomes: Vec<Vec<(CellKey, usize, Outcome)>> = jobs
        .par_iter()
        .map(|&(fold, bias, ci)| {
            let (train, test) = split.split(ds, fold);
            run_job(&train, &test, cfg, bias, ci)
                .into_iter()
                .map(|(key, acc)| (key, fold, acc))
                .collect()
        })
        .collect();

    let mut grouped: BTreeMap<CellKey, Vec<Option<Outcome>>> = BTreeMap::new();
    for (key, fold, acc) in outcomes.into_iter().flatten() {
        let slot = grouped.entry(key).or_insert_with(|| vec![None; cfg.k]);
        slot[fold] = Some(acc);
    }

    let mut cells: Vec<CvCell> = grouped
        .into_iter()
        .map(|((method, bias, ci, mi), folds)| {
            let mut accs = Vec::new();
            let mut errors = Vec::new();
            for (f, r) in folds.into_iter().enumerate() {
                match r {
                    Some(Ok(a)) => accs.push(a),
                    Some(Err(e)) => errors.push(format!("fold {f}: {e}")),
                    None => errors.push(format!("fold {f}: not run")),
                }
            }
            let (mean, std) = if errors.is_empty() {
                let (m, s) = mean_std(&accs);
                (Some(m), Some(s))
            } else {
                (None, None)
            };
            CvCell {
                method,
                bias,
                c: cfg.c_grid[ci],
                mu: mi.map(|i| cfg.mu_grid[i]),
                fold_accuracies: accs,
                mean,
                std,
                errors,
            }
        })
        .collect();
    cells.sort_by(|a, b| {
        (a.method, a.bias)
            .cmp(&(b.method, b.bias))
            .then(a.c.total_cmp(&b.c))
            .then(a.mu.unwrap_or(0.0).total_cmp(&b.mu.unwrap_or(0.0)))
    });
    let best = best_index(cells.iter());
    Ok(CvReport {
        dataset: ds.name.clone(),
        k: cfg.k,
        seed: cfg.seed,
        init: cfg.init.name().to_string(),
        cells,
        best,
    })
}

fn best_index<'a>(cells: impl Iterator<Item = &'a CvCell>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, cell) in cells.enumerate() {
        if let Some(m) = cell.mean {
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((i, m));
            }
        }
    }
    best.map(|(i, _)| i)
}

impl CvConfig {
    pub fn train_config(&self, bias: bool, c: f64) -> TrainConfig {
        TrainConfig {
            c,
            loss: self.lsvm_loss,
            use_bias: bias,
            max_outer: self.max_outer,
            outer_tol: self.outer_tol,
            inner: self.opt.clone(),
        }
    }
}

/// Standardized fold data and the initial model every method starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSetup {
    pub train: Dataset,
    pub test: Dataset,
    pub init: Model,
}

/// Standardizes with training statistics, picks the initial positives on
/// the training bags and trains the initial classifier.
pub fn prepare_fold(train: &Dataset, test: &Dataset, cfg: &CvConfig, bias: bool, c: f64) -> Result<FoldSetup> {
    let (train, test) = if cfg.standardize {
        let st = Standardizer::fit(train)?;
        (st.apply(train)?, st.apply(test)?)
    } else {
        (train.clone(), test.clone())
    };
    let positives = initial_positives(&train, &cfg.init)?;
    let (init, _) = train_initial_svm(&train, &positives, &cfg.train_config(bias, c))?;
    Ok(FoldSetup { train, test, init })
}

fn run_job(
    train: &Dataset,
    test: &Dataset,
    cfg: &CvConfig,
    bias: bool,
    ci: usize,
) -> Vec<(CellKey, Outcome)> {
    let c = cfg.c_grid[ci];
    let keys: Vec<CellKey> = cfg
        .methods
        .iter()
        .flat_map(|&m| -> Vec<CellKey> {
            match m {
                Method::Slsvm => (0..cfg.mu_grid.len()).map(|mi| (m, bias, ci, Some(mi))).collect(),
                _ => vec![(m, bias, ci, None)],
            }
        })
        .collect();

    let setup = match prepare_fold(train, test, cfg, bias, c) {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return keys.into_iter().map(|k| (k, Err(msg.clone()))).collect();
        }
    };
    let FoldSetup { train, test, init } = setup;

    keys.into_iter()
        .map(|key| {
            let (method, _, _, mi) = key;
            let model = match method {
                Method::Svm => Ok(init.clone()),
                Method::Lsvm => {
                    train_lsvm_cccp(&init, &train, &cfg.train_config(bias, c)).map(|(m, _)| m)
                }
                Method::Slsvm => {
                    let scfg = SmoothConfig {
                        mu: cfg.mu_grid[mi.unwrap_or(0)],
                        n_top: cfg.n_top,
                        omega: cfg.omega,
                        loss: cfg.smooth_loss,
                        c,
                    };
                    train_slsvm(&init, &train, &scfg, &cfg.opt).map(|(m, _)| m)
                }
            };
            let acc = model
                .and_then(|m| bag_accuracy(&m, &test))
                .map_err(|e| e.to_string());
            (key, acc)
        })
        .collect()
}

impl CvReport {
    /// Best cell for one `(method, bias)` column.
    pub fn best_for(&self, method: Method, bias: bool) -> Option<&CvCell> {
        let col: Vec<&CvCell> = self
            .cells
            .iter()
            .filter(|c| c.method == method && c.bias == bias)
            .collect();
        best_index(col.iter().copied()).map(|i| col[i])
    }

    /// Aligned text: one summary row in the `LSVM/SLSVM × w/o, w/ bias`
    /// layout, followed by every cell.
    pub fn to_table(&self) -> String {
        let columns = [
            (Method::Lsvm, false, "LSVM w/o bias"),
            (Method::Slsvm, false, "SLSVM w/o bias"),
            (Method::Lsvm, true, "LSVM w/ bias"),
            (Method::Slsvm, true, "SLSVM w/ bias"),
        ];
        let fmt_cell = |c: Option<&CvCell>| match c.and_then(|c| c.mean.zip(c.std)) {
            Some((m, s)) => format!("{m:.1} ± {s:.1}"),
            None => "-".to_string(),
        };
        let mut out = String::new();
        let _ = write!(out, "{:<12}", "Dataset");
        for (_, _, name) in &columns {
            let _ = write!(out, " {name:>16}");
        }
        out.push('\n');
        let _ = write!(out, "{:<12}", self.dataset);
        for (m, b, _) in &columns {
            let _ = write!(out, " {:>16}", fmt_cell(self.best_for(*m, *b)));
        }
        out.push('\n');
        let _ = writeln!(out, "\n{}-fold average ± standard deviation of bag accuracy (%), init={}, seed={}", self.k, self.init, self.seed);
        let _ = writeln!(out, "\n{:<6} {:<5} {:>9} {:>9} {:>16}", "method", "bias", "C", "mu", "accuracy");
        for (i, c) in self.cells.iter().enumerate() {
            let mu = c.mu.map_or("-".to_string(), |m| format!("{m}"));
            let mark = if Some(i) == self.best { " *" } else { "" };
            let _ = writeln!(
                out,
                "{:<6} {:<5} {:>9} {:>9} {:>16}{mark}",
                c.method.as_str(),
                if c.bias { "yes" } else { "no" },
                c.c,
                mu,
                fmt_cell(Some(c)),
            );
        }
        out
    }
}
