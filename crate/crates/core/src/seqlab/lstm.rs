use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{sigmoid, Mat};

/// One LSTM direction. Gate rows are stacked `[input, forget, candidate, output]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input: usize,
    pub hidden: usize,
    pub w: Mat,
    pub u: Mat,
    pub b: Vec<f64>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    /// Gates after their nonlinearities, `[i, f, g, o]`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    h_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            input,
            hidden,
            w: Mat::zeros(4 * hidden, input),
            u: Mat::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform `±1/√fan_in` weights, forget-gate bias 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, r: &mut R) -> Self {
        let a = 1.0 / ((input + hidden).max(1) as f64).sqrt();
        let mut draw = |rows, cols| Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| r.gen_range(-a..a)).collect(),
        };
        let w = draw(4 * hidden, input);
        let u = draw(4 * hidden, hidden);
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        LstmParams { input, hidden, w, u, b }
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 3] {
        [&self.w.data, &self.u.data, &self.b]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.w.data, &mut self.u.data, &mut self.b]
    }

    pub(crate) fn forward_cached(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
        let h = self.hidden;
        let mut a = self.b.clone();
        self.w.mul_add(x, &mut a);
        self.u.mul_add(h_prev, &mut a);
        for (k, v) in a.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let mut c = vec![0.0; h];
        let mut hs = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        for j in 0..h {
            c[j] = a[h + j] * c_prev[j] + a[j] * a[2 * h + j];
            tanh_c[j] = c[j].tanh();
            hs[j] = a[3 * h + j] * tanh_c[j];
        }
        let cache = StepCache {
            gates: a,
            c_prev: c_prev.to_vec(),
            h_prev: h_prev.to_vec(),
            tanh_c,
        };
        (hs, c, cache)
    }

    /// Runs the sequence left to right, or right to left when `reverse`; outputs stay in input order.
    pub(crate) fn run(&self, xs: &[Vec<f64>], reverse: bool) -> (Vec<Vec<f64>>, Vec<StepCache>) {
        let n = xs.len();
        let mut h = vec![0.0; self.hidden];
        let mut c = vec![0.0; self.hidden];
        let mut out = vec![Vec::new(); n];
        let mut caches: Vec<Option<StepCache>> = vec![None; n];
        for s in 0..n {
            let t = if reverse { n - 1 - s } else { s };
            let (h2, c2, cache) = self.forward_cached(&xs[t], &h, &c);
            out[t] = h2.clone();
            caches[t] = Some(cache);
            h = h2;
            c = c2;
        }
        (out, caches.into_iter().map(|c| c.unwrap()).collect())
    }

    /// Backpropagates one step given the gradients on `h_t` and `c_t`. Adds parameter gradients
    /// to `grad` and input gradients to `dx`; returns the gradients on `(h_prev, c_prev)`.
    pub(crate) fn step_backward(
        &self,
        x: &[f64],
        cache: &StepCache,
        dh: &[f64],
        dc_in: &[f64],
        grad: &mut LstmParams,
        dx: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let g = &cache.gates;
        let mut da = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_c[j];
            let dc = dc_in[j] + dh[j] * o * (1.0 - tc * tc);
            da[j] = dc * cand * i * (1.0 - i);
            da[h + j] = dc * cache.c_prev[j] * f * (1.0 - f);
            da[2 * h + j] = dc * i * (1.0 - cand * cand);
            da[3 * h + j] = dh[j] * tc * o * (1.0 - o);
            dc_prev[j] = dc * f;
        }
        grad.w.add_outer(&da, x);
        grad.u.add_outer(&da, &cache.h_prev);
        for (gb, d) in grad.b.iter_mut().zip(&da) {
            *gb += d;
        }
        self.w.mul_t_add(&da, dx);
        let mut dh_prev = vec![0.0; h];
        self.u.mul_t_add(&da, &mut dh_prev);
        (dh_prev, dc_prev)
    }

    /// Backpropagates `dh[t]` through time. Adds parameter gradients to `grad` and returns `dL/dx`.
    pub(crate) fn backward(
        &self,
        xs: &[Vec<f64>],
        caches: &[StepCache],
        dh: &[Vec<f64>],
        reverse: bool,
        grad: &mut LstmParams,
    ) -> Vec<Vec<f64>> {
        let n = xs.len();
        let mut dx = vec![vec![0.0; self.input]; n];
        let mut dh_next = vec![0.0; self.hidden];
        let mut dc_next = vec![0.0; self.hidden];
        let mut total = vec![0.0; self.hidden];
        for s in (0..n).rev() {
            let t = if reverse { n - 1 - s } else { s };
            for ((a, b), c) in total.iter_mut().zip(&dh[t]).zip(&dh_next) {
                *a = b + c;
            }
            let (dhp, dcp) = self.step_backward(&xs[t], &caches[t], &total, &dc_next, grad, &mut dx[t]);
            dh_next = dhp;
            dc_next = dcp;
        }
        dx
    }
}

/// A single cell update.
pub fn lstm_step(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (h, c, _) = p.forward_cached(x, h_prev, c_prev);
    (h, c)
}

/// One bidirectional layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLayer {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

/// Stacked bidirectional LSTM; every layer outputs `[h_fwd; h_bwd]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub layers: Vec<BiLayer>,
}

pub(crate) struct EncoderCache {
    inputs: Vec<Vec<Vec<f64>>>,
    fwd: Vec<Vec<StepCache>>,
    bwd: Vec<Vec<StepCache>>,
}

impl BiLstm {
    pub fn init<R: Rng>(input: usize, hidden: usize, layers: usize, r: &mut R) -> Self {
        let layers = (0..layers)
            .map(|l| {
                let d = if l == 0 { input } else { 2 * hidden };
                BiLayer {
                    fwd: LstmParams::init(d, hidden, r),
                    bwd: LstmParams::init(d, hidden, r),
                }
            })
            .collect();
        BiLstm { layers }
    }

    pub fn zeros_like(&self) -> Self {
        BiLstm {
            layers: self
                .layers
                .iter()
                .map(|l| BiLayer {
                    fwd: LstmParams::zeros(l.fwd.input, l.fwd.hidden),
                    bwd: LstmParams::zeros(l.bwd.input, l.bwd.hidden),
                })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fwd.input
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].fwd.hidden
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden()
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.fwd.tensors().into_iter().chain(l.bwd.tensors())).collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let [a, b, c] = l.fwd.tensors_mut();
                let [d, e, f] = l.bwd.tensors_mut();
                [a, b, c, d, e, f]
            })
            .collect()
    }

    pub(crate) fn forward_cached(&self, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, EncoderCache) {
        let mut cur = xs.to_vec();
        let mut cache = EncoderCache {
            inputs: Vec::with_capacity(self.layers.len()),
            fwd: Vec::new(),
            bwd: Vec::new(),
        };
        for l in &self.layers {
            let (hf, cf) = l.fwd.run(&cur, false);
            let (hb, cb) = l.bwd.run(&cur, true);
            let next = hf.into_iter().zip(hb).map(|(mut a, b)| {
                a.extend(b);
                a
            });
            let next: Vec<Vec<f64>> = next.collect();
            cache.inputs.push(std::mem::replace(&mut cur, next));
            cache.fwd.push(cf);
            cache.bwd.push(cb);
        }
        (cur, cache)
    }

    /// Per-position hidden states of the top layer, width `2h`.
    pub fn forward(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        self.forward_cached(xs).0
    }

    /// Adds parameter gradients to `grad`; returns `dL/dx` for the input sequence.
    pub(crate) fn backward(&self, cache: &EncoderCache, dout: Vec<Vec<f64>>, grad: &mut BiLstm) -> Vec<Vec<f64>> {
        let mut d = dout;
        for (k, l) in self.layers.iter().enumerate().rev() {
            let h = l.fwd.hidden;
            let df: Vec<Vec<f64>> = d.iter().map(|v| v[..h].to_vec()).collect();
            let db: Vec<Vec<f64>> = d.iter().map(|v| v[h..].to_vec()).collect();
            let xs = &cache.inputs[k];
            let g = &mut grad.layers[k];
            let mut dx = l.fwd.backward(xs, &cache.fwd[k], &df, false, &mut g.fwd);
            let dxb = l.bwd.backward(xs, &cache.bwd[k], &db, true, &mut g.bwd);
            for (a, b) in dx.iter_mut().zip(dxb) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            d = dx;
        }
        d
    }
}
