//! Linear max-instance classifier and latent SVM training.
//!
//! A bag is labeled by the sign of its best-scoring instance. Training the
//! latent SVM objective
//!
//! ```text
//! ½‖w‖² + C Σᵢ ℓ(yᵢ, max_z wᵀφ(xᵢ, z) + b)
//! ```
//!
//! alternates between imputing the best instance of every positive bag and
//! solving the convex problem that results. Negative bags keep the maximum
//! inside the loss, which stays convex as a pointwise maximum of convex
//! functions. Each alternation cannot increase the objective.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset, Label};
use crate::error::{Error, Result};
use crate::graph::InstanceRef;
use crate::loss::LossKind;
use crate::optim::{self, OptConfig, OptReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub w: Vec<f64>,
    /// Unregularized offset; present iff the model uses a bias.
    pub bias: Option<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Model {
    pub fn zeros(dim: usize, use_bias: bool) -> Model {
        Model {
            w: vec![0.0; dim],
            bias: use_bias.then_some(0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn use_bias(&self) -> bool {
        self.bias.is_some()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.bias.unwrap_or(0.0)
    }

    /// `w` followed by the bias, if any.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.w.clone();
        p.extend(self.bias);
        p
    }

    pub fn from_params(params: &[f64], use_bias: bool) -> Model {
        if use_bias {
            let (w, b) = params.split_at(params.len() - 1);
            Model {
                w: w.to_vec(),
                bias: Some(b[0]),
            }
        } else {
            Model {
                w: params.to_vec(),
                bias: None,
            }
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }

    /// Text form: a `dim d [bias]` header, then one weight per line and the
    /// bias last, all in shortest round-trip decimal.
    pub fn to_text(&self) -> String {
        let mut out = format!("dim {}", self.dim());
        if self.use_bias() {
            out.push_str(" bias");
        }
        out.push('\n');
        for x in self.params() {
            let _ = writeln!(out, "{x}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Model> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::EmptyFile)?;
        let bad_header = || Error::Parse {
            line,
            msg: format!("expected `dim d [bias]`, got {header:?}"),
        };
        let mut parts = header.split_whitespace();
        if parts.next() != Some("dim") {
            return Err(bad_header());
        }
        let dim: usize = parts.next().and_then(|d| d.parse().ok()).ok_or_else(bad_header)?;
        let use_bias = match parts.next() {
            None => false,
            Some("bias") => true,
            Some(_) => return Err(bad_header()),
        };
        let params = lines
            .map(|(line, l)| {
                l.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("invalid weight {l:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = dim + usize::from(use_bias);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: params.len(),
            });
        }
        Ok(Model::from_params(&params, use_bias))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        Model::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: Label,
    pub argmax: usize,
    pub score: f64,
}

/// Index and score of the best instance; ties go to the lowest instance id.
fn best_instance(model: &Model, bag: &Bag) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, inst) in bag.instances.iter().enumerate() {
        let s = model.score(&inst.features);
        if s > best.1 {
            best = (j, s);
        }
    }
    best
}

/// `sign(max_z wᵀφ + b)` with `sign(0) = +1`.
pub fn decision(model: &Model, bag: &Bag) -> Result<Decision> {
    if let Some(inst) = bag.instances.iter().find(|i| i.features.len() != model.dim()) {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: inst.features.len(),
        });
    }
    if bag.is_empty() {
        return Err(Error::invalid(format!("bag {} is empty", bag.id)));
    }
    let (j, score) = best_instance(model, bag);
    Ok(Decision {
        label: Label::from_sign(score),
        argmax: bag.instances[j].id,
        score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c: f64,
    pub loss: LossKind,
    pub use_bias: bool,
    pub max_outer: usize,
    /// Relative objective decrease below which alternation stops.
    pub outer_tol: f64,
    pub inner: OptConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            loss: LossKind::Hinge,
            use_bias: false,
            max_outer: 50,
            outer_tol: 1e-6,
            inner: OptConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::invalid("C must be positive"));
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::invalid("outer_tol must be positive"));
        }
        self.inner.validate()
    }
}

/// `½‖w‖² + C Σᵢ ℓ(yᵢ, max_z wᵀφ(xᵢ, z) + b)` for an explicit loss.
pub fn latent_objective(model: &Model, ds: &Dataset, loss: LossKind, c: f64) -> Result<f64> {
    model.check_dim(ds.dim)?;
    let terms: Vec<f64> = ds
        .bags
        .par_iter()
        .map(|bag| loss.value(bag.label.sign(), best_instance(model, bag).1))
        .collect();
    let value = 0.5 * dot(&model.w, &model.w) + c * terms.iter().sum::<f64>();
    if !value.is_finite() {
        return Err(Error::NonFinite("latent SVM objective".into()));
    }
    Ok(value)
}

/// The latent SVM objective under `cfg.loss` and `cfg.c`.
pub fn lsvm_objective(model: &Model, ds: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    latent_objective(model, ds, cfg.loss, cfg.c)
}

/// How the positive side of the initial (non-latent) classifier is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PositiveSet {
    /// One averaged feature vector per positive bag.
    BagAveraged,
    /// An explicit list of positive instances, e.g. from the cover.
    Instances(Vec<InstanceRef>),
}

fn bag_average(bag: &Bag, dim: usize) -> Vec<f64> {
    let mut avg = vec![0.0; dim];
    for inst in &bag.instances {
        avg.iter_mut().zip(&inst.features).for_each(|(a, x)| *a += x);
    }
    let n = bag.len() as f64;
    avg.iter_mut().for_each(|a| *a /= n);
    avg
}

/// Objective and gradient of a plain regularized linear classifier over
/// `(features, label)` examples, with parameters `w` (+ bias).
fn linear_objective_grad(
    examples: &[(&[f64], f64)],
    params: &[f64],
    use_bias: bool,
    loss: LossKind,
    c: f64,
) -> (f64, Vec<f64>) {
    let model = Model::from_params(params, use_bias);
    let d = model.dim();
    let mut grad = params.to_vec();
    if use_bias {
        grad[d] = 0.0;
    }
    let mut value = 0.5 * dot(&model.w, &model.w);
    for (x, y) in examples {
        let s = model.score(x);
        value += c * loss.value(*y, s);
        let coef = c * loss.derivative(*y, s);
        if coef != 0.0 {
            grad[..d].iter_mut().zip(x.iter()).for_each(|(g, xi)| *g += coef * xi);
            if use_bias {
                grad[d] += coef;
            }
        }
    }
    (value, grad)
}

/// Trains a non-latent classifier with every instance of every negative bag
/// as a negative and `positives` as positives. The hinge is replaced by the
/// squared hinge so the problem can be solved with L-BFGS.
pub fn train_initial_svm(
    ds: &Dataset,
    positives: &PositiveSet,
    cfg: &TrainConfig,
) -> Result<(Model, OptReport)> {
    cfg.validate()?;
    let pos_vectors: Vec<Vec<f64>> = match positives {
        PositiveSet::BagAveraged => ds
            .bags
            .iter()
            .filter(|b| b.is_positive())
            .map(|b| bag_average(b, ds.dim))
            .collect(),
        PositiveSet::Instances(refs) => refs
            .iter()
            .map(|r| {
                ds.instance(r.bag_id, r.instance_id)
                    .map(|i| i.features.clone())
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "positive instance {}:{} not in dataset",
                            r.bag_id, r.instance_id
                        ))
                    })
            })
            .collect::<Result<_>>()?,
    };
    if pos_vectors.is_empty() {
        return Err(Error::EmptyPositives);
    }
    if pos_vectors.iter().any(|v| v.len() != ds.dim) {
        return Err(Error::DimensionMismatch {
            expected: ds.dim,
            found: pos_vectors[0].len(),
        });
    }
    let mut examples: Vec<(&[f64], f64)> = pos_vectors.iter().map(|v| (v.as_slice(), 1.0)).collect();
    examples.extend(
        ds.bags
            .iter()
            .filter(|b| !b.is_positive())
            .flat_map(|b| b.instances.iter().map(|i| (i.features.as_slice(), -1.0))),
    );
    let loss = cfg.loss.smooth_surrogate();
    let x0 = Model::zeros(ds.dim, cfg.use_bias).params();
    let (params, report) = optim::minimize(
        |p| linear_objective_grad(&examples, p, cfg.use_bias, loss, cfg.c),
        &x0,
        &cfg.inner,
    )?;
    Ok((Model::from_params(&params, cfg.use_bias), report))
}

/// Best instance of every positive bag under `model`.
pub fn impute(model: &Model, ds: &Dataset) -> Result<BTreeMap<u64, usize>> {
    model.check_dim(ds.dim)?;
    Ok(ds
        .bags
        .iter()
        .filter(|b| b.is_positive())
        .map(|b| (b.id, b.instances[best_instance(model, b).0].id))
        .collect())
}

/// Convex surrogate with positives fixed to their imputed instances.
fn imputed_objective_grad(
    ds: &Dataset,
    imputed: &[Option<usize>],
    params: &[f64],
    use_bias: bool,
    loss: LossKind,
    c: f64,
) -> (f64, Vec<f64>) {
    let model = Model::from_params(params, use_bias);
    let d = model.dim();
    // (loss, dℓ/ds, bag index, instance index) per bag
    let terms: Vec<(f64, f64, usize, usize)> = ds
        .bags
        .par_iter()
        .enumerate()
        .map(|(i, bag)| {
            let y = bag.label.sign();
            let (j, s) = match imputed[i] {
                Some(j) => (j, model.score(&bag.instances[j].features)),
                None => best_instance(&model, bag),
            };
            (loss.value(y, s), loss.derivative(y, s), i, j)
        })
        .collect();
    let mut value = 0.5 * dot(&model.w, &model.w);
    let mut grad = params.to_vec();
    if use_bias {
        grad[d] = 0.0;
    }
    for (l, dl, i, j) in terms {
        value += c * l;
        let coef = c * dl;
        if coef != 0.0 {
            let x = &ds.bags[i].instances[j].features;
            grad[..d].iter_mut().zip(x).for_each(|(g, xi)| *g += coef * xi);
            if use_bias {
                grad[d] += coef;
            }
        }
    }
    (value, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CccpReport {
    /// Optimized objective (smooth surrogate loss) at the start and after
    /// every outer iteration. Nonincreasing.
    pub trace: Vec<f64>,
    /// The same iterates evaluated under the configured loss.
    pub reported_trace: Vec<f64>,
    pub loss_optimized: LossKind,
    pub outer_iterations: usize,
    pub converged: bool,
    pub inner_reports: Vec<OptReport>,
}

/// Alternating (concave-convex) latent SVM training from `init`.
pub fn train_lsvm_cccp(init: &Model, ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, CccpReport)> {
    cfg.validate()?;
    init.check_dim(ds.dim)?;
    ds.require_both_labels()?;
    let loss = cfg.loss.smooth_surrogate();
    let use_bias = init.use_bias();
    let mut model = init.clone();
    let mut obj = latent_objective(&model, ds, loss, cfg.c)?;
    let mut report = CccpReport {
        trace: vec![obj],
        reported_trace: vec![latent_objective(&model, ds, cfg.loss, cfg.c)?],
        loss_optimized: loss,
        outer_iterations: 0,
        converged: false,
        inner_reports: Vec::new(),
    };
    for _ in 0..cfg.max_outer {
        let imputed: Vec<Option<usize>> = ds
            .bags
            .iter()
            .map(|b| b.is_positive().then(|| best_instance(&model, b).0))
            .collect();
        let (params, inner) = optim::minimize(
            |p| imputed_objective_grad(ds, &imputed, p, use_bias, loss, cfg.c),
            &model.params(),
            &cfg.inner,
        )?;
        report.inner_reports.push(inner);
        report.outer_iterations += 1;
        let candidate = Model::from_params(&params, use_bias);
        let new_obj = latent_objective(&candidate, ds, loss, cfg.c)?;
        let decrease = obj - new_obj;
        if new_obj <= obj {
            model = candidate;
            obj = new_obj;
        }
        report.trace.push(obj);
        report
            .reported_trace
            .push(latent_objective(&model, ds, cfg.loss, cfg.c)?);
        if decrease < cfg.outer_tol * obj.abs().max(1.0) {
            report.converged = true;
            break;
        }
    }
    Ok((model, report))
}
