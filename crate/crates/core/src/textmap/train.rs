use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{LossParts, Sample, TextMapConfig, TextMapModel, S_BOUND};
use crate::embeddings::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::model::Document;
use crate::nn::clip_global_norm;
use crate::util::{derive_seed, rng};
use rand::seq::SliceRandom;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextMapTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Documents per update.
    pub batch: usize,
    pub seed: u64,
    pub clip: f64,
    /// Decay the step size linearly towards zero over the run.
    pub decay: bool,
}

impl Default for TextMapTrainConfig {
    fn default() -> Self {
        TextMapTrainConfig {
            lr: 0.5,
            epochs: 30,
            batch: 4,
            seed: 0,
            clip: 5.0,
            decay: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TextMapTrainReport {
    /// Mean joint objective per epoch.
    pub epoch_objective: Vec<f64>,
    pub last_parts: LossParts,
    /// `exp(−s_k)` after training.
    pub weights: [f64; 3],
}

/// Mean objective and gradient over `batch`, reduced in batch order.
pub fn batch_objective(model: &TextMapModel, batch: &[&Sample]) -> Result<(LossParts, TextMapModel)> {
    let parts: Vec<(LossParts, TextMapModel)> =
        batch.par_iter().map(|s| model.objective_and_grad(s)).collect::<Result<_>>()?;
    let mut g = model.zeros_like();
    let mut mean = LossParts::default();
    let inv = 1.0 / batch.len().max(1) as f64;
    for (p, gi) in &parts {
        mean.semantic += p.semantic * inv;
        mean.spatial += p.spatial * inv;
        mean.cross += p.cross * inv;
        mean.boxes += p.boxes * inv;
        mean.total += p.total * inv;
        for (t, s) in g.tensors_mut().into_iter().zip(gi.tensors()) {
            t.iter_mut().zip(s).for_each(|(a, b)| *a += b * inv);
        }
    }
    Ok((mean, g))
}

/// One plain SGD step; `s_k` are then clamped.
pub fn sgd_step(model: &mut TextMapModel, grad: &TextMapModel, lr: f64) {
    for (w, g) in model.tensors_mut().into_iter().zip(grad.tensors()) {
        w.iter_mut().zip(g).for_each(|(a, b)| *a -= lr * b);
    }
    model.s.iter_mut().for_each(|v| *v = v.clamp(-S_BOUND, S_BOUND));
}

pub fn prepare_all(model: &TextMapModel, docs: &[Document], provider: &(dyn EmbeddingProvider + Sync)) -> Result<Vec<Sample>> {
    docs.par_iter().map(|d| model.prepare(d, provider)).collect()
}

pub fn train_textmap(
    docs: &[Document],
    provider: &(dyn EmbeddingProvider + Sync),
    config: &TextMapConfig,
    cfg: &TextMapTrainConfig,
) -> Result<(TextMapModel, TextMapTrainReport)> {
    if cfg.batch == 0 || cfg.lr <= 0.0 || cfg.clip <= 0.0 {
        return Err(Error::invalid("batch, clip and learning rate must be positive"));
    }
    let mut model = TextMapModel::init(config.clone(), provider.dim(), &mut rng(derive_seed(cfg.seed, 1)))?;
    let samples: Vec<Sample> = prepare_all(&model, docs, provider)?.into_iter().filter(|s| !s.regions.is_empty()).collect();
    if samples.is_empty() {
        return Err(Error::invalid("cannot train on a corpus without tokens"));
    }
    let report = fit(&mut model, &samples, cfg)?;
    Ok((model, report))
}

/// SGD over prepared samples.
pub fn fit(model: &mut TextMapModel, samples: &[Sample], cfg: &TextMapTrainConfig) -> Result<TextMapTrainReport> {
    let mut r = rng(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut report = TextMapTrainReport::default();
    let steps = (cfg.epochs * samples.len().div_ceil(cfg.batch)).max(1);
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (parts, mut g) = batch_objective(model, &batch)?;
            let mut gs = g.tensors_mut();
            let norm = clip_global_norm(&mut gs, cfg.clip);
            if !norm.is_finite() {
                return Err(Error::TrainingFailure(format!("non-finite gradient in batch {batches}")));
            }
            drop(gs);
            let lr = match cfg.decay {
                true => cfg.lr * (1.0 - step as f64 / steps as f64).max(1e-4),
                false => cfg.lr,
            };
            sgd_step(model, &g, lr);
            step += 1;
            total += parts.total;
            batches += 1;
            report.last_parts = parts;
        }
        report.epoch_objective.push(total / batches.max(1) as f64);
    }
    report.weights = model.loss_weights();
    Ok(report)
}
