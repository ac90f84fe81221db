use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heads::SequenceModel;
use crate::error::{Error, Result};
use crate::nn::clip_global_norm;
use crate::util::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Sequences per update.
    pub batch: usize,
    pub seed: u64,
    /// Global gradient-norm bound.
    pub clip: f64,
}

impl Default for SeqTrainConfig {
    fn default() -> Self {
        SeqTrainConfig {
            lr: 0.5,
            epochs: 30,
            batch: 4,
            seed: 0,
            clip: 5.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeqTrainReport {
    /// Mean per-token loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Largest pre-clip gradient norm seen.
    pub max_grad_norm: f64,
}

/// One training example: dense inputs with their label indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSequence {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Token-averaged loss and gradient over `batch`, reduced in batch order.
pub fn batch_gradient<M: SequenceModel>(model: &M, batch: &[&LabeledSequence]) -> Result<(f64, usize, M)> {
    let parts: Vec<(f64, M)> = batch
        .par_iter()
        .map(|s| model.loss_and_grad(&s.inputs, &s.labels))
        .collect::<Result<_>>()?;
    let tokens: usize = batch.iter().map(|s| s.labels.len()).sum();
    let mut total = model.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        for (t, s) in total.tensors_mut().into_iter().zip(g.tensors()) {
            t.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        }
    }
    let inv = 1.0 / tokens.max(1) as f64;
    for t in total.tensors_mut() {
        t.iter_mut().for_each(|v| *v *= inv);
    }
    Ok((loss, tokens, total))
}

/// Plain minibatch SGD with global-norm clipping.
pub fn train_sequence_model<M: SequenceModel>(
    mut model: M,
    data: &[LabeledSequence],
    cfg: &SeqTrainConfig,
) -> Result<(M, SeqTrainReport)> {
    if data.is_empty() || data.iter().all(|s| s.labels.is_empty()) {
        return Err(Error::invalid("cannot train on an empty corpus"));
    }
    if cfg.batch == 0 || cfg.clip <= 0.0 || cfg.lr <= 0.0 {
        return Err(Error::invalid("batch, clip and learning rate must be positive"));
    }
    let mut r = rng(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).filter(|&i| !data[i].labels.is_empty()).collect();
    let mut report = SeqTrainReport::default();
    let mut batch_id = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        let (mut loss, mut tokens) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&LabeledSequence> = chunk.iter().map(|&i| &data[i]).collect();
            let (l, n, mut g) = batch_gradient(&model, &batch)?;
            let mut gs = g.tensors_mut();
            let norm = clip_global_norm(&mut gs, cfg.clip);
            if !l.is_finite() || !norm.is_finite() {
                return Err(Error::TrainingFailure(format!("non-finite loss in batch {batch_id}")));
            }
            report.max_grad_norm = report.max_grad_norm.max(norm);
            for (w, d) in model.tensors_mut().into_iter().zip(gs) {
                w.iter_mut().zip(d.iter()).for_each(|(a, b)| *a -= cfg.lr * b);
            }
            loss += l;
            tokens += n;
            batch_id += 1;
        }
        report.epoch_loss.push(loss / tokens.max(1) as f64);
    }
    Ok((model, report))
}
