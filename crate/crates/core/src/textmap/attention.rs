use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::Grid;
use crate::nn::{dot, Mat};

/// Grids with more cells per side than this attend within a local window.
pub const FULL_ATTENTION_SIDE: usize = 64;
/// Half-width of the local window (9×9 cells).
pub const WINDOW_RADIUS: usize = 4;

/// Multi-head attention with spatial queries and semantic keys and values, then a value matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fusion {
    pub heads: usize,
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    /// Applied to the concatenated heads.
    pub v: Mat,
}

pub(crate) struct FusionCache {
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    /// Per head, per query: `(key indices, weights)`.
    attn: Vec<Vec<(Vec<usize>, Vec<f64>)>>,
    o: Vec<Vec<f64>>,
}

fn project(m: &Mat, g: &Grid) -> Vec<Vec<f64>> {
    (0..g.cells())
        .map(|k| {
            let mut out = vec![0.0; m.rows];
            m.mul_add(g.cell(k), &mut out);
            out
        })
        .collect()
}

/// Keys visible from query cell `q`.
pub(crate) fn visible(h: usize, w: usize, q: usize) -> Vec<usize> {
    if h <= FULL_ATTENTION_SIDE && w <= FULL_ATTENTION_SIDE {
        return (0..h * w).collect();
    }
    let (qi, qj) = (q / w, q % w);
    let (i0, i1) = (qi.saturating_sub(WINDOW_RADIUS), (qi + WINDOW_RADIUS).min(h - 1));
    let (j0, j1) = (qj.saturating_sub(WINDOW_RADIUS), (qj + WINDOW_RADIUS).min(w - 1));
    (i0..=i1).flat_map(|i| (j0..=j1).map(move |j| i * w + j)).collect()
}

impl Fusion {
    pub fn init<R: Rng>(c: usize, heads: usize, r: &mut R) -> Self {
        Fusion {
            heads,
            wq: Mat::uniform(c, c, r),
            wk: Mat::uniform(c, c, r),
            wv: Mat::uniform(c, c, r),
            v: Mat::uniform(c, c, r),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let c = self.v.rows;
        Fusion {
            heads: self.heads,
            wq: Mat::zeros(c, c),
            wk: Mat::zeros(c, c),
            wv: Mat::zeros(c, c),
            v: Mat::zeros(c, c),
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.wq.data, &self.wk.data, &self.wv.data, &self.v.data]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.wq.data, &mut self.wk.data, &mut self.wv.data, &mut self.v.data]
    }

    fn head_dim(&self) -> usize {
        self.v.rows / self.heads
    }

    /// Attention weights of every head, `[head][query]` over the visible keys.
    pub fn weights(&self, fs: &Grid, ft: &Grid) -> Vec<Vec<(Vec<usize>, Vec<f64>)>> {
        self.forward_cached(fs, ft).1.attn
    }

    pub fn forward(&self, fs: &Grid, ft: &Grid) -> Grid {
        self.forward_cached(fs, ft).0
    }

    pub(crate) fn forward_cached(&self, fs: &Grid, ft: &Grid) -> (Grid, FusionCache) {
        let c = self.v.rows;
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let q = project(&self.wq, fs);
        let k = project(&self.wk, ft);
        let u = project(&self.wv, ft);
        let n = fs.cells();
        let mut o = vec![vec![0.0; c]; n];
        let mut attn = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            let mut per_query = Vec::with_capacity(n);
            for (qi, oq) in o.iter_mut().enumerate() {
                let keys = visible(fs.h, fs.w, qi);
                let qv = &q[qi][cols.clone()];
                let logits: Vec<f64> = keys.iter().map(|&kj| dot(qv, &k[kj][cols.clone()]) * scale).collect();
                let a = crate::nn::softmax(&logits);
                for (&kj, &p) in keys.iter().zip(&a) {
                    for (x, y) in oq[cols.clone()].iter_mut().zip(&u[kj][cols.clone()]) {
                        *x += p * y;
                    }
                }
                per_query.push((keys, a));
            }
            attn.push(per_query);
        }
        let mut out = Grid::zeros(fs.h, fs.w, c);
        for (i, oi) in o.iter().enumerate() {
            self.v.mul_add(oi, &mut out.data[i * c..(i + 1) * c]);
        }
        (out, FusionCache { q, k, u, attn, o })
    }

    /// Adds parameter gradients; returns `(dL/dF_spatial, dL/dF_semantic)`.
    pub(crate) fn backward(&self, fs: &Grid, ft: &Grid, cache: &FusionCache, dm: &Grid, grad: &mut Fusion) -> (Grid, Grid) {
        let c = self.v.rows;
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let n = fs.cells();
        let mut d_o = vec![vec![0.0; c]; n];
        for i in 0..n {
            let g = dm.cell(i);
            grad.v.add_outer(g, &cache.o[i]);
            self.v.mul_t_add(g, &mut d_o[i]);
        }
        let mut dq = vec![vec![0.0; c]; n];
        let mut dk = vec![vec![0.0; c]; ft.cells()];
        let mut du = vec![vec![0.0; c]; ft.cells()];
        for h in 0..self.heads {
            let cols = h * dh..(h + 1) * dh;
            for (qi, (keys, a)) in cache.attn[h].iter().enumerate() {
                let go = &d_o[qi][cols.clone()];
                // dA_j = dO · u_j; dS_j = A_j (dA_j - Σ A dA)
                let da: Vec<f64> = keys.iter().map(|&kj| dot(go, &cache.u[kj][cols.clone()])).collect();
                let mean: f64 = a.iter().zip(&da).map(|(p, d)| p * d).sum();
                for ((&kj, &p), &dj) in keys.iter().zip(a).zip(&da) {
                    for (x, y) in du[kj][cols.clone()].iter_mut().zip(go) {
                        *x += p * y;
                    }
                    let ds = p * (dj - mean) * scale;
                    if ds != 0.0 {
                        for t in cols.clone() {
                            dq[qi][t] += ds * cache.k[kj][t];
                            dk[kj][t] += ds * cache.q[qi][t];
                        }
                    }
                }
            }
        }
        let mut dfs = Grid::zeros(fs.h, fs.w, fs.c);
        let mut dft = Grid::zeros(ft.h, ft.w, ft.c);
        for i in 0..n {
            grad.wq.add_outer(&dq[i], fs.cell(i));
            self.wq.mul_t_add(&dq[i], &mut dfs.data[i * fs.c..(i + 1) * fs.c]);
        }
        for j in 0..ft.cells() {
            grad.wk.add_outer(&dk[j], ft.cell(j));
            grad.wv.add_outer(&du[j], ft.cell(j));
            let slot = &mut dft.data[j * ft.c..(j + 1) * ft.c];
            self.wk.mul_t_add(&dk[j], slot);
            self.wv.mul_t_add(&du[j], slot);
        }
        (dfs, dft)
    }
}
