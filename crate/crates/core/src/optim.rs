//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! The line search follows the bracketing/zoom scheme of Nocedal & Wright
//! (Algorithms 3.5 and 3.6) with safeguarded cubic interpolation. Trial points
//! whose objective or gradient is not finite are treated as failed trials and
//! the step is shortened.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Convergence threshold on the ∞-norm of the gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    /// Maximum objective evaluations per line search.
    pub max_line_search: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            memory: 10,
            grad_tol: 1e-6,
            max_iters: 500,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::invalid("line search requires 0 < c1 < c2 < 1"));
        }
        if self.memory == 0 {
            return Err(Error::invalid("memory must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("grad_tol must be positive"));
        }
        if self.max_line_search == 0 {
            return Err(Error::invalid("max_line_search must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptReport {
    pub iterations: usize,
    pub final_grad_norm: f64,
    /// Objective at the start point and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub termination: Termination,
    /// Curvature pairs rejected because `sᵀy` was not positive.
    pub skipped_pairs: usize,
    pub evaluations: usize,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn all_finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|x| x.is_finite())
}

/// `-H g` by the two-loop recursion.
fn search_direction(g: &[f64], pairs: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some(last) = pairs.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|x| *x *= gamma);
    }
    for (p, a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        q.iter_mut().zip(&p.s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

/// Minimizer of the cubic interpolating `(a, fa, ga)` and `(b, fb, gb)`.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> Option<f64> {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = gb - ga + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b - (b - a) * (gb + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

#[derive(Clone)]
struct Trial {
    alpha: f64,
    f: f64,
    df: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

enum SearchOutcome {
    Accepted(Trial),
    Failed(Option<Trial>),
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    df0: f64,
    cfg: &'a OptConfig,
    evals: usize,
    best: Option<Trial>,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&mut self, alpha: f64) -> Option<Trial> {
        self.evals += 1;
        let x: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + alpha * di).collect();
        let (f, g) = (self.f)(&x);
        if !all_finite(f, &g) || g.len() != x.len() {
            return None;
        }
        let df = dot(&g, self.d);
        let t = Trial { alpha, f, df, x, g };
        if t.f < self.f0 && self.best.as_ref().is_none_or(|b| t.f < b.f) {
            self.best = Some(t.clone());
        }
        Some(t)
    }

    fn armijo(&self, t: &Trial) -> bool {
        t.f <= self.f0 + self.cfg.c1 * t.alpha * self.df0
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.df.abs() <= -self.cfg.c2 * self.df0
    }

    fn run(mut self, alpha0: f64) -> (SearchOutcome, usize) {
        let origin = Trial {
            alpha: 0.0,
            f: self.f0,
            df: self.df0,
            x: self.x.to_vec(),
            g: Vec::new(),
        };
        let mut prev = origin;
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.cfg.max_line_search {
            let Some(t) = self.eval(alpha) else {
                alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
                continue;
            };
            if !self.armijo(&t) || (!first && t.f >= prev.f) {
                return self.zoom(prev, t);
            }
            if self.curvature(&t) {
                return (SearchOutcome::Accepted(t), self.evals);
            }
            if t.df >= 0.0 {
                return self.zoom(t, prev);
            }
            let lo = 1.1 * t.alpha;
            let hi = 10.0 * t.alpha;
            alpha = cubic_min(prev.alpha, prev.f, prev.df, t.alpha, t.f, t.df)
                .filter(|a| *a > t.alpha)
                .map_or(2.0 * t.alpha, |a| a.clamp(lo, hi));
            prev = t;
            first = false;
        }
        let best = self.best.take();
        (SearchOutcome::Failed(best), self.evals)
    }

    /// `lo` satisfies Armijo with the lowest value seen; the minimizer lies
    /// between `lo` and `hi`.
    fn zoom(mut self, mut lo: Trial, mut hi: Trial) -> (SearchOutcome, usize) {
        while self.evals < self.cfg.max_line_search {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= f64::EPSILON * b.max(1.0) {
                break;
            }
            let margin = 0.05 * width;
            let alpha = cubic_min(lo.alpha, lo.f, lo.df, hi.alpha, hi.f, hi.df)
                .filter(|t| *t > a + margin && *t < b - margin)
                .unwrap_or(0.5 * (a + b));
            let Some(t) = self.eval(alpha) else {
                hi = Trial {
                    alpha,
                    f: f64::INFINITY,
                    df: f64::INFINITY * (alpha - lo.alpha).signum(),
                    x: Vec::new(),
                    g: Vec::new(),
                };
                continue;
            };
            if !self.armijo(&t) || t.f >= lo.f {
                hi = t;
            } else {
                if self.curvature(&t) {
                    return (SearchOutcome::Accepted(t), self.evals);
                }
                if t.df * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
        let best = self.best.take();
        (SearchOutcome::Failed(best), self.evals)
    }
}

/// Minimizes a smooth function given as `x ↦ (f(x), ∇f(x))`.
///
/// Returns the final iterate and a report. A line-search breakdown is not an
/// error: the best point found so far is returned with
/// [`Termination::LineSearchFailure`].
pub fn minimize<F>(mut objective: F, x0: &[f64], cfg: &OptConfig) -> Result<(Vec<f64>, OptReport)>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    let mut x = x0.to_vec();
    let (mut fx, mut g) = objective(&x);
    if !all_finite(fx, &g) {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: g.len(),
        });
    }
    let mut report = OptReport {
        iterations: 0,
        final_grad_norm: norm_inf(&g),
        objective_trace: vec![fx],
        grad_norm_trace: vec![norm_inf(&g)],
        termination: Termination::MaxIters,
        skipped_pairs: 0,
        evaluations: 1,
    };
    let mut pairs: VecDeque<Pair> = VecDeque::new();

    loop {
        if norm_inf(&g) <= cfg.grad_tol {
            report.termination = Termination::Converged;
            break;
        }
        if report.iterations >= cfg.max_iters {
            report.termination = Termination::MaxIters;
            break;
        }
        let mut d = search_direction(&g, &pairs);
        let mut df0 = dot(&g, &d);
        if !(df0 < 0.0) {
            // lost descent; restart from steepest descent
            pairs.clear();
            d = g.iter().map(|x| -x).collect();
            df0 = dot(&g, &d);
        }
        let alpha0 = if pairs.is_empty() {
            1.0 / dot(&g, &g).sqrt().max(1.0)
        } else {
            1.0
        };
        let search = LineSearch {
            f: &mut objective,
            x: &x,
            d: &d,
            f0: fx,
            df0,
            cfg,
            evals: 0,
            best: None,
        };
        let (outcome, evals) = search.run(alpha0);
        report.evaluations += evals;
        let (trial, failed) = match outcome {
            SearchOutcome::Accepted(t) => (Some(t), false),
            SearchOutcome::Failed(best) => (best, true),
        };
        if let Some(t) = trial {
            let s: Vec<f64> = t.x.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = t.g.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            let yy = dot(&y, &y);
            if sy > f64::EPSILON * yy.sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
                if pairs.len() == cfg.memory {
                    pairs.pop_front();
                }
                pairs.push_back(Pair { s, y, rho: 1.0 / sy });
            } else {
                report.skipped_pairs += 1;
            }
            x = t.x;
            fx = t.f;
            g = t.g;
            report.iterations += 1;
            report.objective_trace.push(fx);
            report.grad_norm_trace.push(norm_inf(&g));
        }
        if failed {
            report.termination = if norm_inf(&g) <= cfg.grad_tol {
                Termination::Converged
            } else {
                Termination::LineSearchFailure
            };
            break;
        }
    }
    report.final_grad_norm = norm_inf(&g);
    Ok((x, report))
}
