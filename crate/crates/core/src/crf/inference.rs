//! Exact inference over dense linear-chain potentials.

use crate::error::{Error, Result};

/// Log-potentials of one sequence: `unary[i * l + y]` and `trans[a * l + b]`.
///
/// The chain starts in a fixed START state that carries no weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Potentials {
    pub n: usize,
    pub l: usize,
    pub unary: Vec<f64>,
    pub trans: Vec<f64>,
}

impl Potentials {
    pub fn zeros(n: usize, l: usize) -> Self {
        Potentials {
            n,
            l,
            unary: vec![0.0; n * l],
            trans: vec![0.0; l * l],
        }
    }

    #[inline]
    pub fn u(&self, i: usize, y: usize) -> f64 {
        self.unary[i * self.l + y]
    }

    #[inline]
    pub fn t(&self, a: usize, b: usize) -> f64 {
        self.trans[a * self.l + b]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub l: usize,
    /// `unary[i * l + y] = P(y_i = y)`.
    pub unary: Vec<f64>,
    /// `pair[(i - 1) * l * l + a * l + b] = P(y_{i-1} = a, y_i = b)` for `i ≥ 1`.
    pub pair: Vec<f64>,
    pub log_z: f64,
}

impl Marginals {
    pub fn at(&self, i: usize, y: usize) -> f64 {
        self.unary[i * self.l + y]
    }

    pub fn pair_at(&self, i: usize, a: usize, b: usize) -> f64 {
        self.pair[(i - 1) * self.l * self.l + a * self.l + b]
    }
}

pub fn sequence_score(p: &Potentials, y: &[usize]) -> Result<f64> {
    if y.len() != p.n || p.n == 0 {
        return Err(Error::invalid(format!("{} labels for a sequence of length {}", y.len(), p.n)));
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= p.l) {
        return Err(Error::invalid(format!("label {bad} outside alphabet of {}", p.l)));
    }
    let mut s = p.u(0, y[0]);
    for i in 1..p.n {
        s += p.t(y[i - 1], y[i]) + p.u(i, y[i]);
    }
    Ok(s)
}

/// Exponentiated potentials, each position shifted by its maximum.
struct Scaled {
    /// `exp(unary - shift_i)`.
    emit: Vec<f64>,
    /// `exp(trans - shift_t)`.
    trans: Vec<f64>,
    /// `Σ_i shift_i + (n - 1) shift_t`.
    log_shift: f64,
}

fn scaled(p: &Potentials) -> Scaled {
    let l = p.l;
    let mut emit = vec![0.0; p.n * l];
    let mut log_shift = 0.0;
    for i in 0..p.n {
        let row = &p.unary[i * l..(i + 1) * l];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        log_shift += m;
        for y in 0..l {
            emit[i * l + y] = (row[y] - m).exp();
        }
    }
    let mt = p.trans.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let trans = p.trans.iter().map(|t| (t - mt).exp()).collect();
    log_shift += mt * p.n.saturating_sub(1) as f64;
    Scaled { emit, trans, log_shift }
}

/// Forward messages normalized per position, with `ln` of each normalizer.
fn forward(p: &Potentials, s: &Scaled) -> (Vec<f64>, Vec<f64>) {
    let (n, l) = (p.n, p.l);
    let mut alpha = vec![0.0; n * l];
    let mut norm = vec![0.0; n];
    for i in 0..n {
        for b in 0..l {
            let v = if i == 0 {
                1.0
            } else {
                let prev = &alpha[(i - 1) * l..i * l];
                (0..l).map(|a| prev[a] * s.trans[a * l + b]).sum::<f64>()
            };
            alpha[i * l + b] = v * s.emit[i * l + b];
        }
        let z: f64 = alpha[i * l..(i + 1) * l].iter().sum();
        alpha[i * l..(i + 1) * l].iter_mut().for_each(|v| *v /= z);
        norm[i] = z;
    }
    (alpha, norm)
}

/// Backward messages, scaled by the forward normalizers of the following position.
fn backward(p: &Potentials, s: &Scaled, norm: &[f64]) -> Vec<f64> {
    let (n, l) = (p.n, p.l);
    let mut beta = vec![1.0; n * l];
    for i in (0..n.saturating_sub(1)).rev() {
        for a in 0..l {
            let mut v = 0.0;
            for b in 0..l {
                v += s.trans[a * l + b] * s.emit[(i + 1) * l + b] * beta[(i + 1) * l + b];
            }
            beta[i * l + a] = v / norm[i + 1];
        }
    }
    beta
}

pub fn log_partition(p: &Potentials) -> f64 {
    if p.n == 0 {
        return 0.0;
    }
    let s = scaled(p);
    let (_, norm) = forward(p, &s);
    s.log_shift + norm.iter().map(|z| z.ln()).sum::<f64>()
}

pub fn sequence_log_prob(p: &Potentials, y: &[usize]) -> Result<f64> {
    Ok(sequence_score(p, y)? - log_partition(p))
}

pub fn marginals(p: &Potentials) -> Marginals {
    let (n, l) = (p.n, p.l);
    if n == 0 {
        return Marginals {
            l,
            unary: Vec::new(),
            pair: Vec::new(),
            log_z: 0.0,
        };
    }
    let s = scaled(p);
    let (alpha, norm) = forward(p, &s);
    let beta = backward(p, &s, &norm);
    let log_z = s.log_shift + norm.iter().map(|z| z.ln()).sum::<f64>();
    let unary = alpha.iter().zip(&beta).map(|(a, b)| a * b).collect();
    let mut pair = vec![0.0; (n - 1) * l * l];
    for i in 1..n {
        for a in 0..l {
            let fa = alpha[(i - 1) * l + a] / norm[i];
            for b in 0..l {
                pair[(i - 1) * l * l + a * l + b] = fa * s.trans[a * l + b] * s.emit[i * l + b] * beta[i * l + b];
            }
        }
    }
    Marginals { l, unary, pair, log_z }
}

/// Highest-scoring path. Ties go to the lowest label index, both for the final label and for
/// every back-pointer.
pub fn viterbi(p: &Potentials) -> Vec<usize> {
    let (n, l) = (p.n, p.l);
    if n == 0 {
        return Vec::new();
    }
    let mut delta: Vec<f64> = p.unary[..l].to_vec();
    let mut back = vec![0usize; n * l];
    let mut next = vec![0.0; l];
    for i in 1..n {
        for b in 0..l {
            let mut best = (0, f64::NEG_INFINITY);
            for (a, &d) in delta.iter().enumerate() {
                let s = d + p.t(a, b);
                if s > best.1 {
                    best = (a, s);
                }
            }
            back[i * l + b] = best.0;
            next[b] = best.1 + p.u(i, b);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut y = vec![0; n];
    let mut best = f64::NEG_INFINITY;
    for (b, &d) in delta.iter().enumerate() {
        if d > best {
            best = d;
            y[n - 1] = b;
        }
    }
    for i in (1..n).rev() {
        y[i - 1] = back[i * l + y[i]];
    }
    y
}
