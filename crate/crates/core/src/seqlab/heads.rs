use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::BiLstm;
use crate::crf::{marginals, sequence_log_prob, viterbi, Potentials};
use crate::error::Result;
use crate::nn::{log_softmax, softmax, Mat};

/// A differentiable tagger over dense input sequences.
pub trait SequenceModel: Clone + Send + Sync {
    fn num_labels(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn zeros_like(&self) -> Self;
    /// Parameter tensors in a fixed order.
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
    /// Summed loss over the sequence with the gradient of every parameter.
    fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<(f64, Self)>;
    fn loss(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<f64>;
    fn predict(&self, xs: &[Vec<f64>]) -> Vec<usize>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn set_flat_params(&mut self, flat: &[f64]) {
        let mut at = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[at..at + t.len()]);
            at += t.len();
        }
        assert_eq!(at, flat.len(), "parameter vector length mismatch");
    }
}

fn check_lengths(xs: &[Vec<f64>], ys: &[usize], dim: usize, labels: usize) -> Result<()> {
    use crate::error::Error;
    if xs.is_empty() {
        return Err(Error::invalid("empty sequence"));
    }
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!("{} inputs but {} labels", xs.len(), ys.len())));
    }
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::invalid(format!("input of width {} for a model expecting {dim}", x.len())));
    }
    if let Some(y) = ys.iter().find(|&&y| y >= labels) {
        return Err(Error::invalid(format!("label {y} out of range")));
    }
    Ok(())
}

/// BiLSTM encoder with the `ReLU(W2 ReLU(W1 h + b1) + b2)` head and a softmax.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstmClassifier {
    pub encoder: BiLstm,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

struct HeadCache {
    z1: Vec<f64>,
    logits: Vec<f64>,
}

impl BiLstmClassifier {
    pub fn init<R: Rng>(input: usize, hidden: usize, layers: usize, head: usize, labels: usize, r: &mut R) -> Self {
        let encoder = BiLstm::init(input, hidden, layers, r);
        let w1 = Mat::uniform(head, 2 * hidden, r);
        let w2 = Mat::uniform(labels, head, r);
        BiLstmClassifier {
            encoder,
            w1,
            b1: vec![0.0; head],
            w2,
            // positive so the output rectifiers start in their linear region
            b2: vec![1.0; labels],
        }
    }

    fn head(&self, h: &[f64]) -> HeadCache {
        let mut z1 = self.b1.clone();
        self.w1.mul_add(h, &mut z1);
        z1.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut logits = self.b2.clone();
        self.w2.mul_add(&z1, &mut logits);
        logits.iter_mut().for_each(|v| *v = v.max(0.0));
        HeadCache { z1, logits }
    }

    /// Per-position label distributions.
    pub fn classify(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.encoder.forward(xs).iter().map(|h| softmax(&self.head(h).logits)).collect()
    }

    /// Per-position head outputs before the softmax.
    pub fn logits(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.encoder.forward(xs).iter().map(|h| self.head(h).logits).collect()
    }
}

impl SequenceModel for BiLstmClassifier {
    fn num_labels(&self) -> usize {
        self.b2.len()
    }

    fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    fn zeros_like(&self) -> Self {
        BiLstmClassifier {
            encoder: self.encoder.zeros_like(),
            w1: Mat::zeros(self.w1.rows, self.w1.cols),
            b1: vec![0.0; self.b1.len()],
            w2: Mat::zeros(self.w2.rows, self.w2.cols),
            b2: vec![0.0; self.b2.len()],
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend([&self.w1.data[..], &self.b1, &self.w2.data, &self.b2]);
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend([&mut self.w1.data[..], &mut self.b1, &mut self.w2.data, &mut self.b2]);
        t
    }

    fn loss(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<f64> {
        check_lengths(xs, ys, self.input_dim(), self.num_labels())?;
        Ok(self.logits(xs).iter().zip(ys).map(|(l, &y)| -log_softmax(l)[y]).sum())
    }

    /// Token cross-entropy, summed.
    fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<(f64, Self)> {
        check_lengths(xs, ys, self.input_dim(), self.num_labels())?;
        let (hs, cache) = self.encoder.forward_cached(xs);
        let mut g = self.zeros_like();
        let mut loss = 0.0;
        let mut dh = Vec::with_capacity(hs.len());
        for (h, &y) in hs.iter().zip(ys) {
            let hc = self.head(h);
            let lp = log_softmax(&hc.logits);
            loss -= lp[y];
            let mut dlog: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
            dlog[y] -= 1.0;
            for (d, &l) in dlog.iter_mut().zip(&hc.logits) {
                if l <= 0.0 {
                    *d = 0.0;
                }
            }
            g.w2.add_outer(&dlog, &hc.z1);
            g.b2.iter_mut().zip(&dlog).for_each(|(a, b)| *a += b);
            let mut dz1 = vec![0.0; hc.z1.len()];
            self.w2.mul_t_add(&dlog, &mut dz1);
            for (d, &z) in dz1.iter_mut().zip(&hc.z1) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            g.w1.add_outer(&dz1, h);
            g.b1.iter_mut().zip(&dz1).for_each(|(a, b)| *a += b);
            let mut dhi = vec![0.0; h.len()];
            self.w1.mul_t_add(&dz1, &mut dhi);
            dh.push(dhi);
        }
        self.encoder.backward(&cache, dh, &mut g.encoder);
        Ok((loss, g))
    }

    /// Argmax per position, ties to the lowest label index.
    fn predict(&self, xs: &[Vec<f64>]) -> Vec<usize> {
        self.logits(xs).iter().map(|l| crate::nn::argmax(l)).collect()
    }
}

/// BiLSTM encoder, linear projection to unary scores, and a linear-chain CRF on top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstmCrf {
    pub encoder: BiLstm,
    pub proj: Mat,
    pub bias: Vec<f64>,
    /// `trans[a * L + b]` scores label `a` followed by `b`.
    pub trans: Vec<f64>,
}

impl BiLstmCrf {
    pub fn init<R: Rng>(input: usize, hidden: usize, layers: usize, labels: usize, r: &mut R) -> Self {
        let encoder = BiLstm::init(input, hidden, layers, r);
        BiLstmCrf {
            proj: Mat::uniform(labels, 2 * hidden, r),
            bias: vec![0.0; labels],
            trans: vec![0.0; labels * labels],
            encoder,
        }
    }

    fn potentials_from(&self, hs: &[Vec<f64>]) -> Potentials {
        let l = self.bias.len();
        let mut p = Potentials::zeros(hs.len(), l);
        for (i, h) in hs.iter().enumerate() {
            let row = &mut p.unary[i * l..(i + 1) * l];
            row.copy_from_slice(&self.bias);
            self.proj.mul_add(h, row);
        }
        p.trans.copy_from_slice(&self.trans);
        p
    }

    pub fn potentials(&self, xs: &[Vec<f64>]) -> Potentials {
        self.potentials_from(&self.encoder.forward(xs))
    }
}

impl SequenceModel for BiLstmCrf {
    fn num_labels(&self) -> usize {
        self.bias.len()
    }

    fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    fn zeros_like(&self) -> Self {
        BiLstmCrf {
            encoder: self.encoder.zeros_like(),
            proj: Mat::zeros(self.proj.rows, self.proj.cols),
            bias: vec![0.0; self.bias.len()],
            trans: vec![0.0; self.trans.len()],
        }
    }

    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.encoder.tensors();
        t.extend([&self.proj.data[..], &self.bias, &self.trans]);
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.encoder.tensors_mut();
        t.extend([&mut self.proj.data[..], &mut self.bias, &mut self.trans]);
        t
    }

    fn loss(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<f64> {
        check_lengths(xs, ys, self.input_dim(), self.num_labels())?;
        Ok(-sequence_log_prob(&self.potentials(xs), ys)?)
    }

    /// Negative log-likelihood of the label sequence.
    fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<(f64, Self)> {
        check_lengths(xs, ys, self.input_dim(), self.num_labels())?;
        let l = self.num_labels();
        let (hs, cache) = self.encoder.forward_cached(xs);
        let p = self.potentials_from(&hs);
        let loss = -sequence_log_prob(&p, ys)?;
        let m = marginals(&p);
        let mut g = self.zeros_like();
        for i in 1..hs.len() {
            for a in 0..l {
                for b in 0..l {
                    g.trans[a * l + b] += m.pair_at(i, a, b);
                }
            }
            g.trans[ys[i - 1] * l + ys[i]] -= 1.0;
        }
        let mut dh = Vec::with_capacity(hs.len());
        for (i, h) in hs.iter().enumerate() {
            let mut du: Vec<f64> = (0..l).map(|y| m.at(i, y)).collect();
            du[ys[i]] -= 1.0;
            g.proj.add_outer(&du, h);
            g.bias.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
            let mut dhi = vec![0.0; h.len()];
            self.proj.mul_t_add(&du, &mut dhi);
            dh.push(dhi);
        }
        self.encoder.backward(&cache, dh, &mut g.encoder);
        Ok((loss, g))
    }

    fn predict(&self, xs: &[Vec<f64>]) -> Vec<usize> {
        viterbi(&self.potentials(xs))
    }
}
