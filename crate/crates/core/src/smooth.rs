//! Smoothed latent SVM.
//!
//! The bag score `max_j sⱼ` equals `max_{u∈Δ} ⟨s, u⟩` over the probability
//! simplex. Subtracting `(μ/2)·ω(u)` for a strongly convex `ω` makes it
//! differentiable with gradient `Σⱼ u*ⱼ xⱼ`:
//!
//! * Euclidean, `ω(u) = ‖u‖²`: `u* = Π_Δ(s/μ)`, a sparse, order-preserving
//!   projection. The value lies in `[max s − μ/2, max s − μ/(2m)]`.
//! * Entropy, `ω(u) = 2 Σ uⱼ ln uⱼ`: `u* = softmax(s/μ)` and the value is
//!   `μ·ln Σ exp(sⱼ/μ)`.
//!
//! Because the projection is order preserving, projecting only the `N` largest
//! scores gives the exact answer whenever fewer than `N` of them end up in the
//! support; otherwise the bag falls back to the full instance list.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::lsvm::{dot, Model};
use crate::optim::{self, OptConfig, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Omega {
    Euclidean,
    Entropy,
}

impl Omega {
    pub fn as_str(self) -> &'static str {
        match self {
            Omega::Euclidean => "euclidean",
            Omega::Entropy => "entropy",
        }
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Omega {
    type Err = Error;

    fn from_str(s: &str) -> Result<Omega> {
        match s {
            "euclidean" => Ok(Omega::Euclidean),
            "entropy" => Ok(Omega::Entropy),
            other => Err(Error::invalid(format!("unknown omega {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothConfig {
    pub mu: f64,
    /// Top-N truncation; 0 evaluates every instance.
    pub n_top: usize,
    pub omega: Omega,
    pub loss: LossKind,
    pub c: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig {
            mu: 0.1,
            n_top: 0,
            omega: Omega::Euclidean,
            loss: LossKind::SquaredHinge,
            c: 1.0,
        }
    }
}

impl SmoothConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid("mu must be positive"));
        }
        if !self.loss.is_smooth() {
            return Err(Error::invalid("smoothed training needs a smooth loss"));
        }
        if !(self.c > 0.0) {
            return Err(Error::invalid("C must be positive"));
        }
        Ok(())
    }
}

/// Indices of `v` sorted by value descending, ties by index ascending.
fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    order
}

/// Threshold `θ` and support size `ρ` from values already sorted descending.
///
/// `ρ` is the length of the prefix on which `v₍ⱼ₎ − (Σ_{i≤j} v₍ᵢ₎ − 1)/j > 0`;
/// the scan stops at the first failure.
fn sorted_threshold(sorted: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut cumsum = 0.0;
    let mut rho = 0;
    let mut theta_sum = 0.0;
    for (j, x) in sorted.enumerate() {
        let next = cumsum + x;
        if x - (next - 1.0) / (j + 1) as f64 > 0.0 {
            cumsum = next;
            theta_sum = next;
            rho = j + 1;
        } else {
            break;
        }
    }
    ((theta_sum - 1.0) / rho as f64, rho)
}

/// Euclidean projection onto `{u : Σuᵢ = 1, uᵢ ≥ 0}` by sorting.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    check_vector(v)?;
    let order = descending_order(v);
    let (theta, rho) = sorted_threshold(order.iter().map(|&i| v[i]));
    let mut u = vec![0.0; v.len()];
    for &i in &order[..rho] {
        u[i] = v[i] - theta;
    }
    Ok(u)
}

/// Same projection with an expected-linear-time pivoting threshold search.
pub fn project_simplex_pivot(v: &[f64]) -> Result<Vec<f64>> {
    check_vector(v)?;
    let mut candidates: Vec<usize> = (0..v.len()).collect();
    let (mut sum, mut count) = (0.0, 0usize);
    while !candidates.is_empty() {
        let pivot = v[candidates[candidates.len() / 2]];
        let (greater, less): (Vec<usize>, Vec<usize>) =
            candidates.iter().partition(|&&i| v[i] >= pivot);
        let g_sum: f64 = greater.iter().map(|&i| v[i]).sum();
        if (sum + g_sum) - (count + greater.len()) as f64 * pivot < 1.0 {
            sum += g_sum;
            count += greater.len();
            candidates = less;
        } else {
            // the pivot lies outside the support; only larger values remain
            let mut rest = greater;
            let at = rest.iter().position(|&i| v[i] == pivot).expect("pivot present");
            rest.swap_remove(at);
            candidates = rest;
        }
    }
    let theta = (sum - 1.0) / count as f64;
    Ok(v.iter().map(|x| (x - theta).max(0.0)).collect())
}

fn check_vector(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection input".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMax {
    pub value: f64,
    /// Nonzero weights of `u*` as `(index, weight)`, ascending by index.
    pub weights: Vec<(usize, f64)>,
    /// Whether a top-N evaluation was certified exact. `None` when the full
    /// score vector was used.
    pub certified: Option<bool>,
}

impl SmoothedMax {
    pub fn dense(&self, m: usize) -> Vec<f64> {
        let mut u = vec![0.0; m];
        for &(i, w) in &self.weights {
            u[i] = w;
        }
        u
    }
}

fn euclidean_from_projection(scores: &[f64], weights: Vec<(usize, f64)>, mu: f64) -> SmoothedMax {
    let linear: f64 = weights.iter().map(|&(i, w)| scores[i] * w).sum();
    let sq: f64 = weights.iter().map(|&(_, w)| w * w).sum();
    SmoothedMax {
        value: linear - 0.5 * mu * sq,
        weights,
        certified: None,
    }
}

/// `max_{u∈Δ} ⟨s, u⟩ − (μ/2)·ω(u)` and its maximizer.
pub fn smoothed_max_with(scores: &[f64], mu: f64, omega: Omega) -> Result<SmoothedMax> {
    check_vector(scores)?;
    if !(mu > 0.0) {
        return Err(Error::invalid("mu must be positive"));
    }
    match omega {
        Omega::Euclidean => {
            let scaled: Vec<f64> = scores.iter().map(|s| s / mu).collect();
            let u = project_simplex(&scaled)?;
            let weights = u.into_iter().enumerate().filter(|&(_, w)| w > 0.0).collect();
            Ok(euclidean_from_projection(scores, weights, mu))
        }
        Omega::Entropy => {
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| ((s - max) / mu).exp()).collect();
            let z: f64 = e.iter().sum();
            Ok(SmoothedMax {
                value: max + mu * z.ln(),
                weights: e.into_iter().map(|x| x / z).enumerate().collect(),
                certified: None,
            })
        }
    }
}

pub fn smoothed_max(scores: &[f64], cfg: &SmoothConfig) -> Result<SmoothedMax> {
    smoothed_max_with(scores, cfg.mu, cfg.omega)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopScores {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

/// The `n_top` best instance scores of a bag, ties by lowest instance index.
pub fn top_n_scores(model: &Model, bag: &Bag, n_top: usize) -> Result<TopScores> {
    if n_top == 0 || n_top > bag.len() {
        return Err(Error::invalid(format!(
            "n_top must lie in [1, {}], got {n_top}",
            bag.len()
        )));
    }
    let all: Vec<f64> = bag.instances.iter().map(|i| model.score(&i.features)).collect();
    Ok(top_of(&all, n_top))
}

fn top_of(scores: &[f64], n_top: usize) -> TopScores {
    let mut indices = descending_order(scores);
    indices.truncate(n_top);
    TopScores {
        scores: indices.iter().map(|&i| scores[i]).collect(),
        indices,
    }
}

/// Tries the top-N shortcut for the Euclidean smoothing; `None` when the
/// reduced projection cannot be certified.
fn truncated_euclidean(scores: &[f64], mu: f64, n_top: usize) -> Option<SmoothedMax> {
    let top = top_of(scores, n_top);
    let (theta, rho) = sorted_threshold(top.scores.iter().map(|s| s / mu));
    if rho >= n_top {
        return None;
    }
    let mut weights: Vec<(usize, f64)> = top.indices[..rho]
        .iter()
        .map(|&i| (i, scores[i] / mu - theta))
        .collect();
    weights.sort_by_key(|&(i, _)| i);
    let mut out = euclidean_from_projection(scores, weights, mu);
    out.certified = Some(true);
    Some(out)
}

/// Smoothed max of one bag's instance scores, honoring `cfg.n_top`.
pub fn smoothed_bag(model: &Model, bag: &Bag, cfg: &SmoothConfig) -> Result<SmoothedMax> {
    let scores: Vec<f64> = bag.instances.iter().map(|i| model.score(&i.features)).collect();
    smoothed_scores(&scores, cfg)
}

fn smoothed_scores(scores: &[f64], cfg: &SmoothConfig) -> Result<SmoothedMax> {
    let truncating = cfg.n_top > 0 && cfg.n_top < scores.len();
    if truncating && cfg.omega == Omega::Euclidean {
        if let Some(out) = truncated_euclidean(scores, cfg.mu, cfg.n_top) {
            return Ok(out);
        }
    }
    let mut out = smoothed_max(scores, cfg)?;
    if truncating {
        out.certified = Some(false);
    }
    Ok(out)
}

/// `Σⱼ u*ⱼ xⱼ`, accumulated in ascending instance order.
pub fn bag_gradient(bag: &Bag, sm: &SmoothedMax, dim: usize) -> Vec<f64> {
    let mut g = vec![0.0; dim];
    for &(j, u) in &sm.weights {
        g.iter_mut()
            .zip(&bag.instances[j].features)
            .for_each(|(gi, x)| *gi += u * x);
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEval {
    pub value: f64,
    /// Gradient over `w`, followed by the bias partial when the model has one.
    pub grad: Vec<f64>,
    /// `(bag id, certified)` for every bag evaluated with truncation.
    pub certification: Vec<(u64, bool)>,
}

/// Smoothed objective `½‖w‖² + C Σᵢ ℓ(yᵢ, f_μ(sᵢ))` and its gradient.
pub fn slsvm_objective_grad(model: &Model, ds: &Dataset, cfg: &SmoothConfig) -> Result<SmoothEval> {
    cfg.validate()?;
    model.check_dim(ds.dim)?;
    let d = ds.dim;
    let per_bag: Vec<SmoothedMax> = ds
        .bags
        .par_iter()
        .map(|bag| smoothed_bag(model, bag, cfg))
        .collect::<Result<_>>()?;
    let mut value = 0.5 * dot(&model.w, &model.w);
    let mut grad = model.params();
    if model.use_bias() {
        grad[d] = 0.0;
    }
    let mut certification = Vec::new();
    for (bag, sm) in ds.bags.iter().zip(&per_bag) {
        let y = bag.label.sign();
        value += cfg.c * cfg.loss.value(y, sm.value);
        let coef = cfg.c * cfg.loss.derivative(y, sm.value);
        if coef != 0.0 {
            for &(j, u) in &sm.weights {
                let x = &bag.instances[j].features;
                grad[..d].iter_mut().zip(x).for_each(|(g, xi)| *g += coef * u * xi);
            }
            if model.use_bias() {
                grad[d] += coef;
            }
        }
        if let Some(c) = sm.certified {
            certification.push((bag.id, c));
        }
    }
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("smoothed objective".into()));
    }
    Ok(SmoothEval {
        value,
        grad,
        certification,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_grad_norm: f64,
    pub evaluations: usize,
    /// Fraction of truncated bag evaluations that were certified exact.
    pub certification_rate: Option<f64>,
    pub per_bag_certification: BTreeMap<u64, f64>,
}

/// Minimizes the smoothed objective with L-BFGS starting from `init`.
pub fn train_slsvm(
    init: &Model,
    ds: &Dataset,
    cfg: &SmoothConfig,
    opt: &OptConfig,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    init.check_dim(ds.dim)?;
    let use_bias = init.use_bias();
    let mut cert: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    let (params, rep) = optim::minimize(
        |p| {
            let m = Model::from_params(p, use_bias);
            match slsvm_objective_grad(&m, ds, cfg) {
                Ok(ev) => {
                    for (bag, ok) in ev.certification {
                        let e = cert.entry(bag).or_default();
                        e.0 += usize::from(ok);
                        e.1 += 1;
                    }
                    (ev.value, ev.grad)
                }
                Err(_) => (f64::NAN, vec![f64::NAN; p.len()]),
            }
        },
        &init.params(),
        opt,
    )?;
    let (hits, total) = cert.values().fold((0, 0), |(h, t), &(a, b)| (h + a, t + b));
    let report = TrainReport {
        iterations: rep
            .objective_trace
            .iter()
            .zip(&rep.grad_norm_trace)
            .enumerate()
            .map(|(iteration, (&objective, &grad_norm))| IterationRecord {
                iteration,
                objective,
                grad_norm,
            })
            .collect(),
        termination: rep.termination,
        final_grad_norm: rep.final_grad_norm,
        evaluations: rep.evaluations,
        certification_rate: (total > 0).then(|| hits as f64 / total as f64),
        per_bag_certification: cert
            .into_iter()
            .map(|(b, (h, t))| (b, h as f64 / t as f64))
            .collect(),
    };
    Ok((Model::from_params(&params, use_bias), report))
}
