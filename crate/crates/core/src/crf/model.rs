use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::inference::{self, Marginals, Potentials};
use crate::error::{Error, Result};
use crate::features::{FeatureIndex, FeatureVector};

pub const FORMAT: &str = "metaforge-crf/1";

/// A linear-chain CRF over a fixed label alphabet.
///
/// `weights` holds the unary block (`feature id × label`, row-major) followed by the
/// `label × label` transition block.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfModel {
    pub labels: Vec<String>,
    pub index: FeatureIndex,
    pub weights: Vec<f64>,
    pub sigma2: f64,
}

impl CrfModel {
    pub fn new(labels: Vec<String>, index: FeatureIndex, sigma2: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("CRF needs at least one label"));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
        }
        let n = weight_count(index.len(), labels.len());
        Ok(CrfModel {
            labels,
            index,
            weights: vec![0.0; n],
            sigma2,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.index.len()
    }

    pub fn unary_weight(&self, feature: usize, label: usize) -> f64 {
        self.weights[feature * self.num_labels() + label]
    }

    pub fn transition_weight(&self, a: usize, b: usize) -> f64 {
        let l = self.num_labels();
        self.weights[self.num_features() * l + a * l + b]
    }

    pub fn potentials(&self, x: &[FeatureVector]) -> Potentials {
        potentials(&self.weights, self.num_features(), self.num_labels(), x)
    }

    pub fn sequence_score(&self, x: &[FeatureVector], y: &[usize]) -> Result<f64> {
        inference::sequence_score(&self.potentials(x), y)
    }

    pub fn log_partition(&self, x: &[FeatureVector]) -> f64 {
        inference::log_partition(&self.potentials(x))
    }

    pub fn sequence_log_prob(&self, x: &[FeatureVector], y: &[usize]) -> Result<f64> {
        inference::sequence_log_prob(&self.potentials(x), y)
    }

    pub fn marginals(&self, x: &[FeatureVector]) -> Marginals {
        inference::marginals(&self.potentials(x))
    }

    pub fn viterbi(&self, x: &[FeatureVector]) -> Vec<usize> {
        inference::viterbi(&self.potentials(x))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: CrfFile = serde_json::from_str(text)?;
        CrfModel::from_file(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CrfModel::from_json(&text)
    }

    pub(crate) fn to_file(&self) -> CrfFile {
        let l = self.num_labels();
        let mut weights = BTreeMap::new();
        for f in 1..self.num_features() {
            for (y, label) in self.labels.iter().enumerate() {
                let w = self.unary_weight(f, y);
                if w != 0.0 {
                    weights.insert(format!("{}|{label}", self.index.name(f)), w);
                }
            }
        }
        for a in 0..l {
            for b in 0..l {
                let w = self.transition_weight(a, b);
                if w != 0.0 {
                    weights.insert(format!("->|{}|{}", self.labels[a], self.labels[b]), w);
                }
            }
        }
        CrfFile {
            format: FORMAT.into(),
            labels: self.labels.clone(),
            feature_index: self.index.clone(),
            weights,
            sigma2: self.sigma2,
        }
    }

    pub(crate) fn from_file(f: CrfFile) -> Result<Self> {
        if f.format != FORMAT {
            return Err(Error::invalid(format!("unsupported CRF model format {:?}", f.format)));
        }
        let mut m = CrfModel::new(f.labels, f.feature_index, f.sigma2)?;
        let label_id: BTreeMap<&str, usize> = m.labels.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let l = m.num_labels();
        let nf = m.num_features();
        let bad = |k: &str| Error::invalid(format!("CRF weight {k:?} does not match the model"));
        for (k, w) in &f.weights {
            let slot = if let Some(rest) = k.strip_prefix("->|") {
                let (a, b) = rest.split_once('|').ok_or_else(|| bad(k))?;
                let (a, b) = (label_id.get(a).ok_or_else(|| bad(k))?, label_id.get(b).ok_or_else(|| bad(k))?);
                nf * l + a * l + b
            } else {
                let (feat, label) = k.rsplit_once('|').ok_or_else(|| bad(k))?;
                let fid = m.index.id(feat).ok_or_else(|| bad(k))?;
                fid * l + label_id.get(label).ok_or_else(|| bad(k))?
            };
            m.weights[slot] = *w;
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct CrfFile {
    format: String,
    labels: Vec<String>,
    feature_index: FeatureIndex,
    weights: BTreeMap<String, f64>,
    sigma2: f64,
}

pub fn weight_count(num_features: usize, num_labels: usize) -> usize {
    num_features * num_labels + num_labels * num_labels
}

pub(crate) fn potentials(weights: &[f64], m: usize, l: usize, x: &[FeatureVector]) -> Potentials {
    let mut p = Potentials::zeros(x.len(), l);
    for (i, fv) in x.iter().enumerate() {
        let row = &mut p.unary[i * l..(i + 1) * l];
        for (f, v) in fv.iter() {
            let w = &weights[f * l..(f + 1) * l];
            for y in 0..l {
                row[y] += v * w[y];
            }
        }
    }
    p.trans.copy_from_slice(&weights[m * l..m * l + l * l]);
    p
}
