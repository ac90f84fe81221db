use rand::Rng;
use serde::{Deserialize, Serialize};

use super::word2vec::{corpus_len, sgns_update, NegativeTable, Vocab, MIN_CORPUS_TOKENS};
use crate::error::{Error, Result};
use crate::util::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Char2VecConfig {
    pub dim: usize,
    pub ngram: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub min_count: usize,
    pub unk_buckets: usize,
    pub seed: u64,
}

impl Default for Char2VecConfig {
    fn default() -> Self {
        Char2VecConfig {
            dim: 64,
            ngram: 3,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.05,
            min_count: 2,
            unk_buckets: 16,
            seed: 0,
        }
    }
}

/// Character n-grams of `^word$`; a word shorter than the window gives the padded word itself.
pub fn char_ngrams(word: &str, n: usize) -> Vec<String> {
    let padded: Vec<char> = std::iter::once('^').chain(word.chars()).chain(std::iter::once('$')).collect();
    if padded.len() <= n {
        return vec![padded.into_iter().collect()];
    }
    padded.windows(n).map(|w| w.iter().collect()).collect()
}

/// Token vectors are means of character n-gram vectors, trained to predict context words.
#[derive(Clone, Debug, PartialEq)]
pub struct Char2VecModel {
    pub(crate) grams: Vocab,
    pub dim: usize,
    pub ngram: usize,
    /// N-gram vectors, `grams.rows() × dim`.
    pub(crate) input: Vec<f32>,
    /// Context-word vectors; empty once loaded from file.
    pub(crate) output: Vec<f32>,
    pub config: Char2VecConfig,
    pub epoch_loss: Vec<f64>,
}

pub fn train_char2vec(streams: &[Vec<String>], cfg: &Char2VecConfig) -> Result<Char2VecModel> {
    let total = corpus_len(streams);
    if total < MIN_CORPUS_TOKENS {
        return Err(Error::invalid(format!(
            "char2vec needs at least {MIN_CORPUS_TOKENS} tokens, got {total}"
        )));
    }
    if cfg.dim == 0 || cfg.window == 0 || cfg.ngram == 0 {
        return Err(Error::invalid("char2vec dimension, window and n-gram size must be positive"));
    }
    let all_grams: Vec<String> = streams.iter().flatten().flat_map(|w| char_ngrams(w, cfg.ngram)).collect();
    let grams = Vocab::build(all_grams.iter().map(|s| s.as_str()), 1, cfg.unk_buckets);
    let words = Vocab::build(streams.iter().flatten().map(|s| s.as_str()), cfg.min_count, cfg.unk_buckets);
    let centers: Vec<Vec<Vec<usize>>> = streams
        .iter()
        .map(|s| s.iter().map(|w| char_ngrams(w, cfg.ngram).iter().map(|g| grams.id(g)).collect()).collect())
        .collect();
    let targets: Vec<Vec<usize>> = streams.iter().map(|s| s.iter().map(|w| words.id(w)).collect()).collect();
    let mut counts = vec![0u64; words.rows()];
    targets.iter().flatten().for_each(|&i| counts[i] += 1);
    let table = NegativeTable::new(&counts);
    let d = cfg.dim;
    let mut r = rng(cfg.seed);
    let mut input: Vec<f32> = (0..grams.rows() * d).map(|_| (r.gen::<f32>() - 0.5) / d as f32).collect();
    let mut output = vec![0f32; words.rows() * d];
    let steps = (cfg.epochs * total).max(1) as f64;
    let mut done = 0usize;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut hidden = vec![0f32; d];
    let mut grad = vec![0f32; d];
    for _ in 0..cfg.epochs {
        let (mut loss, mut pairs) = (0.0, 0usize);
        for (cs, ts) in centers.iter().zip(&targets) {
            for (i, gs) in cs.iter().enumerate() {
                let lr = (cfg.lr * (1.0 - done as f64 / steps)).max(cfg.lr * 1e-4) as f32;
                done += 1;
                let b = r.gen_range(1..=cfg.window);
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(ts.len() - 1);
                let inv = 1.0 / gs.len() as f32;
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    hidden.iter_mut().for_each(|h| *h = 0.0);
                    for &g in gs {
                        for (h, v) in hidden.iter_mut().zip(&input[g * d..(g + 1) * d]) {
                            *h += v * inv;
                        }
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let t = ts[j];
                    loss += sgns_update(&hidden, &mut output[t * d..(t + 1) * d], 1.0, lr, &mut grad);
                    for _ in 0..cfg.negatives {
                        let n = table.sample(&mut r);
                        if n == t {
                            continue;
                        }
                        loss += sgns_update(&hidden, &mut output[n * d..(n + 1) * d], 0.0, lr, &mut grad);
                    }
                    for &g in gs {
                        for (w, dg) in input[g * d..(g + 1) * d].iter_mut().zip(&grad) {
                            *w += dg * inv;
                        }
                    }
                    pairs += 1;
                }
            }
        }
        epoch_loss.push(loss / pairs.max(1) as f64);
    }
    Ok(Char2VecModel {
        grams,
        dim: d,
        ngram: cfg.ngram,
        input,
        output,
        config: cfg.clone(),
        epoch_loss,
    })
}

impl Char2VecModel {
    pub fn gram_row(&self, gram: &str) -> &[f32] {
        let i = self.grams.id(gram);
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn gram_count(&self) -> usize {
        self.grams.words.len()
    }

    pub fn embed(&self, word: &str) -> Vec<f64> {
        let gs = char_ngrams(word, self.ngram);
        let mut v = vec![0.0; self.dim];
        for g in &gs {
            for (a, b) in v.iter_mut().zip(self.gram_row(g)) {
                *a += *b as f64;
            }
        }
        let k = gs.len() as f64;
        v.iter_mut().for_each(|a| *a /= k);
        v
    }
}
