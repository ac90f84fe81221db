use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inference::{log_partition, marginals, sequence_score};
use super::model::{potentials, CrfModel};
use crate::error::{Error, Result};
use crate::features::{FeatureIndex, FeatureVector, Raw};

/// One training sequence with gold label ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub x: Vec<FeatureVector>,
    pub y: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrfTrainConfig {
    pub sigma2: f64,
    pub max_iters: usize,
    /// Stop once an accepted step changes the objective by less than this.
    pub tol: f64,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig {
            sigma2: 10.0,
            max_iters: 300,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrfTrainReport {
    /// Objective after each accepted step, starting with the initial value.
    pub objective: Vec<f64>,
    pub converged: bool,
}

/// Instances per gradient work unit. Fixed so that the summation order never depends on the
/// thread count.
const CHUNK: usize = 8;

/// Penalized conditional log-likelihood and its gradient.
///
/// `sigma2 = None` drops the penalty.
pub fn loglik_and_grad(
    weights: &[f64],
    num_features: usize,
    num_labels: usize,
    batch: &[Instance],
    sigma2: Option<f64>,
) -> (f64, Vec<f64>) {
    let (m, l) = (num_features, num_labels);
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; weights.len()];
            let mut ll = 0.0;
            for inst in chunk {
                ll += accumulate(weights, m, l, inst, &mut g);
            }
            (ll, g)
        })
        .collect();
    let mut ll = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for (pl, pg) in parts {
        ll += pl;
        for (a, b) in grad.iter_mut().zip(pg) {
            *a += b;
        }
    }
    if let Some(s2) = sigma2 {
        for (g, w) in grad.iter_mut().zip(weights) {
            ll -= w * w / (2.0 * s2);
            *g -= w / s2;
        }
    }
    (ll, grad)
}

/// Penalized conditional log-likelihood alone; cheaper than [`loglik_and_grad`].
pub fn loglik(weights: &[f64], num_features: usize, num_labels: usize, batch: &[Instance], sigma2: Option<f64>) -> f64 {
    let parts: Vec<f64> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|inst| {
                    let p = potentials(weights, num_features, num_labels, &inst.x);
                    sequence_score(&p, &inst.y).expect("validated instance") - log_partition(&p)
                })
                .sum::<f64>()
        })
        .collect();
    let mut ll: f64 = parts.iter().sum();
    if let Some(s2) = sigma2 {
        for w in weights {
            ll -= w * w / (2.0 * s2);
        }
    }
    ll
}

/// Adds empirical minus expected counts of one instance to `g`; returns its log-probability.
fn accumulate(weights: &[f64], m: usize, l: usize, inst: &Instance, g: &mut [f64]) -> f64 {
    let p = potentials(weights, m, l, &inst.x);
    let mg = marginals(&p);
    let mut score = 0.0;
    for (i, fv) in inst.x.iter().enumerate() {
        let yi = inst.y[i];
        score += p.u(i, yi);
        for (f, v) in fv.iter() {
            let row = &mut g[f * l..(f + 1) * l];
            row[yi] += v;
            for y in 0..l {
                row[y] -= v * mg.at(i, y);
            }
        }
    }
    let t0 = m * l;
    for i in 1..inst.x.len() {
        let (a, b) = (inst.y[i - 1], inst.y[i]);
        score += p.t(a, b);
        g[t0 + a * l + b] += 1.0;
        for a in 0..l {
            for b in 0..l {
                g[t0 + a * l + b] -= mg.pair_at(i, a, b);
            }
        }
    }
    score - mg.log_z
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 20;

/// Gradient ascent with backtracking line search on the penalized log-likelihood.
pub fn fit_weights(model: &mut CrfModel, batch: &[Instance], cfg: &CrfTrainConfig) -> Result<CrfTrainReport> {
    if batch.is_empty() {
        return Err(Error::invalid("cannot train a CRF on an empty corpus"));
    }
    let (m, l) = (model.num_features(), model.num_labels());
    for (k, inst) in batch.iter().enumerate() {
        if inst.x.len() != inst.y.len() || inst.y.iter().any(|&y| y >= l) {
            return Err(Error::invalid(format!("training instance {k} is malformed")));
        }
    }
    let s2 = model.sigma2;
    let (mut obj, mut grad) = loglik_and_grad(&model.weights, m, l, batch, Some(s2));
    let mut report = CrfTrainReport {
        objective: vec![obj],
        converged: false,
    };
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let gn = norm(&grad);
    if gn == 0.0 {
        report.converged = true;
        return Ok(report);
    }
    // the penalty alone has curvature 1/σ², so steps beyond σ² overshoot
    let mut step = (1.0 / gn).min(s2);
    for _ in 0..cfg.max_iters {
        let g2: f64 = grad.iter().map(|v| v * v).sum();
        let mut accepted = None;
        let mut last = f64::NAN;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = model.weights.iter().zip(&grad).map(|(w, g)| w + step * g).collect();
            let o = loglik(&trial, m, l, batch, Some(s2));
            if o.is_finite() && o >= obj + ARMIJO * step * g2 {
                accepted = Some((trial, o));
                break;
            }
            last = o;
            step *= 0.5;
        }
        let Some((w, o)) = accepted else {
            // no representable improvement left: the optimum is reached to working precision
            if (last - obj).abs() <= 1e-12 * (1.0 + obj.abs()) {
                report.converged = true;
                break;
            }
            return Err(Error::TrainingFailure(format!(
                "line search failed {MAX_HALVINGS} times after {} steps; objective {obj:.6}, |grad| {:.3e}, step {step:.3e}",
                report.objective.len() - 1,
                g2.sqrt()
            )));
        };
        let delta = o - obj;
        let (o2, g) = loglik_and_grad(&w, m, l, batch, Some(s2));
        debug_assert!((o2 - o).abs() <= 1e-9 * (1.0 + o.abs()));
        model.weights = w;
        obj = o;
        grad = g;
        report.objective.push(obj);
        step *= 2.0;
        if delta.abs() < cfg.tol || norm(&grad) == 0.0 {
            report.converged = true;
            break;
        }
    }
    Ok(report)
}

/// A labelled sequence before feature indexing.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub features: Vec<Vec<Raw>>,
    pub labels: Vec<usize>,
}

/// Fits a feature index over `data`, then the weights.
pub fn train_crf(labels: Vec<String>, data: &[Sequence], cfg: &CrfTrainConfig) -> Result<(CrfModel, CrfTrainReport)> {
    let index = FeatureIndex::fit(data.iter().flat_map(|s| s.features.iter().map(|f| f.as_slice())))?;
    let mut model = CrfModel::new(labels, index, cfg.sigma2)?;
    let batch: Vec<Instance> = data
        .par_iter()
        .map(|s| Instance {
            x: s.features.iter().map(|f| model.index.vectorize(f)).collect(),
            y: s.labels.clone(),
        })
        .collect();
    let report = fit_weights(&mut model, &batch, cfg)?;
    Ok((model, report))
}
