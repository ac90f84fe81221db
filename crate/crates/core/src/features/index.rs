use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named feature before indexing.
#[derive(Clone, Debug, PartialEq)]
pub enum Raw {
    Bin(String),
    /// Unscaled real value; scaled to `[0, 1]` by the fitted index.
    Real(&'static str, f64),
}

impl Raw {
    pub fn name(&self) -> &str {
        match self {
            Raw::Bin(n) => n,
            Raw::Real(n, _) => n,
        }
    }
}

pub fn bin(name: impl Into<String>) -> Raw {
    Raw::Bin(name.into())
}

/// Sparse `(id, value)` pairs, ids ascending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<(usize, f64)>);

impl FeatureVector {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Id reserved for features never seen during fitting.
pub const OOV: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn scale(&self, v: f64) -> f64 {
        if self.max > self.min {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Frozen name ↔ id map plus min-max ranges of the real-valued features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "IndexFile", into = "IndexFile")]
pub struct FeatureIndex {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    ranges: BTreeMap<String, Range>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    names: Vec<String>,
    ranges: BTreeMap<String, Range>,
}

impl From<IndexFile> for FeatureIndex {
    fn from(f: IndexFile) -> Self {
        let ids = f.names.iter().enumerate().skip(1).map(|(i, n)| (n.clone(), i)).collect();
        FeatureIndex {
            names: f.names,
            ids,
            ranges: f.ranges,
        }
    }
}

impl From<FeatureIndex> for IndexFile {
    fn from(x: FeatureIndex) -> Self {
        IndexFile {
            names: x.names,
            ranges: x.ranges,
        }
    }
}

impl FeatureIndex {
    /// Assigns ids in first-seen order over `items`; id 0 is [`OOV`].
    pub fn fit<'a>(items: impl IntoIterator<Item = &'a [Raw]>) -> Result<Self> {
        let mut x = FeatureIndex {
            names: vec!["<oov>".to_string()],
            ids: HashMap::new(),
            ranges: BTreeMap::new(),
        };
        let mut seen_any = false;
        for feats in items {
            seen_any = true;
            for f in feats {
                let name = f.name();
                if !x.ids.contains_key(name) {
                    x.ids.insert(name.to_string(), x.names.len());
                    x.names.push(name.to_string());
                }
                if let Raw::Real(n, v) = f {
                    let r = x.ranges.entry(n.to_string()).or_insert(Range { min: *v, max: *v });
                    r.min = r.min.min(*v);
                    r.max = r.max.max(*v);
                }
            }
        }
        if !seen_any {
            return Err(Error::invalid("cannot fit a feature index on an empty corpus"));
        }
        Ok(x)
    }

    /// Number of ids including [`OOV`].
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.len() <= 1
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn range(&self, name: &str) -> Option<Range> {
        self.ranges.get(name).copied()
    }

    /// `(id, scaled value)`; unseen names give `(OOV, 0.0)`.
    pub fn encode(&self, f: &Raw) -> (usize, f64) {
        match (f, self.id(f.name())) {
            (_, None) => (OOV, 0.0),
            (Raw::Bin(_), Some(id)) => (id, 1.0),
            (Raw::Real(n, v), Some(id)) => (id, self.ranges[*n].scale(*v)),
        }
    }

    pub fn vectorize(&self, feats: &[Raw]) -> FeatureVector {
        let mut out: Vec<(usize, f64)> = feats
            .iter()
            .map(|f| self.encode(f))
            .filter(|&(id, v)| id != OOV && v != 0.0)
            .collect();
        out.sort_by_key(|p| p.0);
        out.dedup_by_key(|p| p.0);
        FeatureVector(out)
    }
}
