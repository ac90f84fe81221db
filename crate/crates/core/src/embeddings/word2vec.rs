use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{fnv1a, mix64, rng};

/// Smallest corpus (in tokens) the trainers accept.
pub const MIN_CORPUS_TOKENS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_count: usize,
    pub unk_buckets: usize,
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            dim: 64,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            min_count: 2,
            unk_buckets: 16,
            seed: 0,
        }
    }
}

/// Vocabulary of frequent words plus hashed buckets for everything else.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Vocab {
    pub words: Vec<String>,
    pub counts: Vec<u64>,
    pub ids: HashMap<String, usize>,
    pub buckets: usize,
}

impl Vocab {
    pub fn build<'a>(items: impl Iterator<Item = &'a str>, min_count: usize, buckets: usize) -> Self {
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for w in items {
            *freq.entry(w).or_default() += 1;
        }
        let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c as usize >= min_count.max(1)).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Vocab::from_parts(
            kept.iter().map(|(w, _)| w.to_string()).collect(),
            kept.iter().map(|&(_, c)| c).collect(),
            buckets,
        )
    }

    pub fn from_parts(words: Vec<String>, counts: Vec<u64>, buckets: usize) -> Self {
        let ids = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab {
            words,
            counts,
            ids,
            buckets: buckets.max(1),
        }
    }

    /// Rows: one per word, then the buckets.
    pub fn rows(&self) -> usize {
        self.words.len() + self.buckets
    }

    pub fn id(&self, w: &str) -> usize {
        match self.ids.get(w) {
            Some(&i) => i,
            None => self.words.len() + (mix64(fnv1a(w)) % self.buckets as u64) as usize,
        }
    }
}

/// Cumulative unigram^0.75 distribution for negative sampling.
pub(crate) struct NegativeTable {
    cdf: Vec<f64>,
}

impl NegativeTable {
    pub fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cdf = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeTable { cdf }
    }

    pub fn sample<R: Rng>(&self, r: &mut R) -> usize {
        let total = *self.cdf.last().unwrap();
        let u = r.gen_range(0.0..total);
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// One negative-sampling update of `hidden` against target `out_row`, label 1 or 0.
/// Accumulates the hidden-side gradient into `grad` and returns the loss.
#[inline]
pub(crate) fn sgns_update(hidden: &[f32], out_row: &mut [f32], label: f32, lr: f32, grad: &mut [f32]) -> f64 {
    let s: f32 = hidden.iter().zip(out_row.iter()).map(|(a, b)| a * b).sum();
    let p = sigmoid(s);
    let g = lr * (label - p);
    for k in 0..hidden.len() {
        grad[k] += g * out_row[k];
        out_row[k] += g * hidden[k];
    }
    let p = p as f64;
    if label > 0.5 {
        -(p.max(1e-12)).ln()
    } else {
        -((1.0 - p).max(1e-12)).ln()
    }
}

/// Skip-gram with negative sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct Word2VecModel {
    pub(crate) vocab: Vocab,
    pub dim: usize,
    /// Input vectors, `vocab.rows() × dim`.
    pub(crate) input: Vec<f32>,
    /// Output vectors, same shape; empty once loaded from file.
    pub(crate) output: Vec<f32>,
    pub config: Word2VecConfig,
    /// Mean loss per epoch.
    pub epoch_loss: Vec<f64>,
}

pub(crate) fn corpus_len(streams: &[Vec<String>]) -> usize {
    streams.iter().map(|s| s.len()).sum()
}

pub fn train_word2vec(streams: &[Vec<String>], cfg: &Word2VecConfig) -> Result<Word2VecModel> {
    let total = corpus_len(streams);
    if total < MIN_CORPUS_TOKENS {
        return Err(Error::invalid(format!(
            "word2vec needs at least {MIN_CORPUS_TOKENS} tokens, got {total}"
        )));
    }
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(Error::invalid("word2vec dimension and window must be positive"));
    }
    let vocab = Vocab::build(streams.iter().flatten().map(|s| s.as_str()), cfg.min_count, cfg.unk_buckets);
    let ids: Vec<Vec<usize>> = streams.iter().map(|s| s.iter().map(|w| vocab.id(w)).collect()).collect();
    let mut counts = vec![0u64; vocab.rows()];
    ids.iter().flatten().for_each(|&i| counts[i] += 1);
    let table = NegativeTable::new(&counts);
    let d = cfg.dim;
    let mut r = rng(cfg.seed);
    let mut input: Vec<f32> = (0..vocab.rows() * d).map(|_| (r.gen::<f32>() - 0.5) / d as f32).collect();
    let mut output = vec![0f32; vocab.rows() * d];
    let steps = (cfg.epochs * total).max(1) as f64;
    let mut done = 0usize;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0f32; d];
    for _ in 0..cfg.epochs {
        let (mut loss, mut pairs) = (0.0, 0usize);
        for s in &ids {
            for (i, &c) in s.iter().enumerate() {
                let lr = (cfg.lr * (1.0 - done as f64 / steps)).max(cfg.lr * 1e-4) as f32;
                done += 1;
                let b = r.gen_range(1..=cfg.window);
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(s.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let hidden: Vec<f32> = input[c * d..(c + 1) * d].to_vec();
                    let t = s[j];
                    loss += sgns_update(&hidden, &mut output[t * d..(t + 1) * d], 1.0, lr, &mut grad);
                    for _ in 0..cfg.negatives {
                        let n = table.sample(&mut r);
                        if n == t {
                            continue;
                        }
                        loss += sgns_update(&hidden, &mut output[n * d..(n + 1) * d], 0.0, lr, &mut grad);
                    }
                    for (w, g) in input[c * d..(c + 1) * d].iter_mut().zip(&grad) {
                        *w += g;
                    }
                    pairs += 1;
                }
            }
        }
        epoch_loss.push(loss / pairs.max(1) as f64);
    }
    Ok(Word2VecModel {
        vocab,
        dim: d,
        input,
        output,
        config: cfg.clone(),
        epoch_loss,
    })
}

impl Word2VecModel {
    pub fn vocab_size(&self) -> usize {
        self.vocab.words.len()
    }

    pub fn unk_buckets(&self) -> usize {
        self.vocab.buckets
    }

    pub fn contains(&self, w: &str) -> bool {
        self.vocab.ids.contains_key(w)
    }

    /// Input row of `w`, or of its UNK bucket.
    pub fn row(&self, w: &str) -> &[f32] {
        let i = self.vocab.id(w);
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    /// `(rows, dim)` of the output matrix.
    pub fn output_shape(&self) -> (usize, usize) {
        (self.output.len() / self.dim, self.dim)
    }
}
