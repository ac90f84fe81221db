use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::Mat;

/// Channel-last `h × w × c` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Grid {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let k = (i * self.w + j) * self.c;
        &self.data[k..k + self.c]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let k = (i * self.w + j) * self.c;
        &mut self.data[k..k + self.c]
    }

    /// Row `k` of the flattened `(h·w) × c` view.
    #[inline]
    pub fn cell(&self, k: usize) -> &[f64] {
        &self.data[k * self.c..(k + 1) * self.c]
    }

    pub fn cells(&self) -> usize {
        self.h * self.w
    }

    pub fn same_shape(&self, o: &Grid) -> bool {
        self.h == o.h && self.w == o.w && self.c == o.c
    }
}

/// 3×3 convolution, stride 2, one pixel of zero padding, followed by ReLU.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv {
    /// One `cout × cin` matrix per kernel offset, row-major over `(di, dj)`.
    pub taps: Vec<Mat>,
    pub b: Vec<f64>,
}

pub(crate) fn out_size(n: usize) -> usize {
    n.div_ceil(2)
}

impl Conv {
    pub fn init<R: Rng>(cin: usize, cout: usize, r: &mut R) -> Self {
        let a = 1.0 / ((9 * cin).max(1) as f64).sqrt();
        let taps = (0..9)
            .map(|_| Mat {
                rows: cout,
                cols: cin,
                data: (0..cout * cin).map(|_| r.gen_range(-a..a)).collect(),
            })
            .collect();
        Conv { taps, b: vec![0.0; cout] }
    }

    pub fn zeros_like(&self) -> Self {
        Conv {
            taps: self.taps.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect(),
            b: vec![0.0; self.b.len()],
        }
    }

    pub fn cin(&self) -> usize {
        self.taps[0].cols
    }

    pub fn cout(&self) -> usize {
        self.b.len()
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = self.taps.iter().map(|m| &m.data[..]).collect();
        t.push(&self.b);
        t
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = self.taps.iter_mut().map(|m| &mut m.data[..]).collect();
        t.push(&mut self.b);
        t
    }

    /// Input pixel feeding output `(i, j)` through tap `(di, dj)`, if inside the image.
    #[inline]
    fn source(i: usize, j: usize, di: usize, dj: usize, h: usize, w: usize) -> Option<(usize, usize)> {
        let (y, x) = ((2 * i + di) as isize - 1, (2 * j + dj) as isize - 1);
        (y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w).then_some((y as usize, x as usize))
    }

    /// Post-ReLU output. All-zero input pixels are skipped.
    pub fn forward(&self, x: &Grid) -> Grid {
        let (oh, ow) = (out_size(x.h), out_size(x.w));
        let mut out = Grid::zeros(oh, ow, self.cout());
        let live: Vec<bool> = (0..x.cells()).map(|k| x.cell(k).iter().any(|&v| v != 0.0)).collect();
        for i in 0..oh {
            for j in 0..ow {
                let o = out.at_mut(i, j);
                o.copy_from_slice(&self.b);
                for di in 0..3 {
                    for dj in 0..3 {
                        if let Some((y, xx)) = Self::source(i, j, di, dj, x.h, x.w) {
                            if live[y * x.w + xx] {
                                self.taps[di * 3 + dj].mul_add(x.at(y, xx), o);
                            }
                        }
                    }
                }
                o.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        out
    }

    /// Given the forward input `x`, output `y` and `dy = dL/dy`, adds parameter gradients and
    /// returns `dL/dx` when `need_input` is set.
    pub fn backward(&self, x: &Grid, y: &Grid, dy: &Grid, grad: &mut Conv, need_input: bool) -> Option<Grid> {
        let mut dx = need_input.then(|| Grid::zeros(x.h, x.w, x.c));
        let mut da = vec![0.0; self.cout()];
        for i in 0..y.h {
            for j in 0..y.w {
                let mut any = false;
                for ((d, &g), &v) in da.iter_mut().zip(dy.at(i, j)).zip(y.at(i, j)) {
                    *d = if v > 0.0 { g } else { 0.0 };
                    any |= *d != 0.0;
                }
                if !any {
                    continue;
                }
                grad.b.iter_mut().zip(&da).for_each(|(a, b)| *a += b);
                for di in 0..3 {
                    for dj in 0..3 {
                        if let Some((yy, xx)) = Self::source(i, j, di, dj, x.h, x.w) {
                            let t = di * 3 + dj;
                            let xin = x.at(yy, xx);
                            if xin.iter().any(|&v| v != 0.0) {
                                grad.taps[t].add_outer(&da, xin);
                            }
                            if let Some(dx) = dx.as_mut() {
                                self.taps[t].mul_t_add(&da, dx.at_mut(yy, xx));
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Two stacked stride-2 convolutions; output grid is `⌈h/4⌉ × ⌈w/4⌉ × C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stream {
    pub c1: Conv,
    pub c2: Conv,
}

pub(crate) struct StreamCache {
    pub mid: Grid,
}

impl Stream {
    pub fn init<R: Rng>(cin: usize, c: usize, r: &mut R) -> Self {
        Stream {
            c1: Conv::init(cin, c, r),
            c2: Conv::init(c, c, r),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Stream {
            c1: self.c1.zeros_like(),
            c2: self.c2.zeros_like(),
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.c1.tensors();
        t.extend(self.c2.tensors());
        t
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.c1.tensors_mut();
        t.extend(self.c2.tensors_mut());
        t
    }

    pub fn forward(&self, x: &Grid) -> Grid {
        self.forward_cached(x).0
    }

    pub(crate) fn forward_cached(&self, x: &Grid) -> (Grid, StreamCache) {
        let mid = self.c1.forward(x);
        let out = self.c2.forward(&mid);
        (out, StreamCache { mid })
    }

    /// Parameter gradients only; stream inputs are data.
    pub(crate) fn backward(&self, x: &Grid, cache: &StreamCache, out: &Grid, dout: &Grid, grad: &mut Stream) {
        let dmid = self.c2.backward(&cache.mid, out, dout, &mut grad.c2, true).unwrap();
        self.c1.backward(x, &cache.mid, &dmid, &mut grad.c1, false);
    }
}
