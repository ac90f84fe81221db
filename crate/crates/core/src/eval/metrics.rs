use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, Label};

/// Harmonic mean of `p` and `r`; 0 when both are 0.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `matrix[gold][pred]` token counts over all ten labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub matrix: Vec<Vec<usize>>,
}

impl ConfusionCounts {
    pub fn new() -> Self {
        ConfusionCounts {
            matrix: vec![vec![0; Label::COUNT]; Label::COUNT],
        }
    }

    pub fn add(&mut self, gold: Label, pred: Label) {
        self.matrix[gold.index()][pred.index()] += 1;
    }

    pub fn merge(mut self, other: &ConfusionCounts) -> Self {
        for (a, b) in self.matrix.iter_mut().zip(&other.matrix) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }

    pub fn tp(&self, l: Label) -> usize {
        self.matrix[l.index()][l.index()]
    }

    pub fn gold(&self, l: Label) -> usize {
        self.matrix[l.index()].iter().sum()
    }

    pub fn predicted(&self, l: Label) -> usize {
        self.matrix.iter().map(|row| row[l.index()]).sum()
    }

    pub fn fp(&self, l: Label) -> usize {
        self.predicted(l) - self.tp(l)
    }

    pub fn fn_(&self, l: Label) -> usize {
        self.gold(l) - self.tp(l)
    }

    /// Fraction of tokens, Other included, whose prediction equals gold.
    pub fn accuracy(&self) -> f64 {
        let total: usize = self.matrix.iter().flatten().sum();
        let hit: usize = (0..self.matrix.len()).map(|i| self.matrix[i][i]).sum();
        ratio(hit, total)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let (p, r) = (ratio(tp, tp + fp), ratio(tp, tp + fn_));
        Prf {
            precision: p,
            recall: r,
            f1: f1(p, r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(flatten)]
    pub prf: Prf,
}

impl ClassMetrics {
    pub fn gold(&self) -> usize {
        self.tp + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    /// Mean seconds per document of each measured run.
    pub runs: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    /// Mean over the metadata classes that occur in gold or predictions.
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    /// From counts summed over the metadata classes.
    pub micro: Prf,
    pub documents: usize,
    pub confusion: ConfusionCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingStats>,
}

impl MetricsReport {
    pub fn from_confusion(c: ConfusionCounts, documents: usize) -> Self {
        let classes: Vec<ClassMetrics> = Label::METADATA
            .iter()
            .map(|&l| ClassMetrics {
                label: l,
                tp: c.tp(l),
                fp: c.fp(l),
                fn_: c.fn_(l),
                prf: Prf::from_counts(c.tp(l), c.fp(l), c.fn_(l)),
            })
            .collect();
        let active: Vec<&ClassMetrics> = classes.iter().filter(|m| m.tp + m.fp + m.fn_ > 0).collect();
        let mean = |f: fn(&Prf) -> f64| {
            if active.is_empty() {
                0.0
            } else {
                active.iter().map(|m| f(&m.prf)).sum::<f64>() / active.len() as f64
            }
        };
        let macro_avg = Prf {
            precision: mean(|p| p.precision),
            recall: mean(|p| p.recall),
            f1: mean(|p| p.f1),
        };
        let sum = |f: fn(&ClassMetrics) -> usize| classes.iter().map(f).sum::<usize>();
        let micro = Prf::from_counts(sum(|m| m.tp), sum(|m| m.fp), sum(|m| m.fn_));
        MetricsReport {
            classes,
            macro_avg,
            micro,
            documents,
            confusion: c,
            timing: None,
        }
    }

    pub fn class(&self, l: Label) -> Option<&ClassMetrics> {
        self.classes.iter().find(|m| m.label == l)
    }
}

/// Token-level scores of `pred` against the gold annotations of `gold`, document by document.
pub fn score(gold: &[Document], pred: &[Vec<Label>]) -> Result<MetricsReport> {
    if gold.len() != pred.len() {
        return Err(Error::invalid(format!("{} predictions for {} documents", pred.len(), gold.len())));
    }
    let per_doc: Vec<ConfusionCounts> = gold
        .par_iter()
        .zip(pred)
        .map(|(d, p)| {
            let g = d.token_labels();
            if g.len() != p.len() {
                return Err(Error::invalid(format!(
                    "document {}: {} predicted labels for {} tokens",
                    d.id,
                    p.len(),
                    g.len()
                )));
            }
            let mut c = ConfusionCounts::new();
            for (a, b) in g.iter().zip(p) {
                c.add(*a, *b);
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let total = per_doc.iter().fold(ConfusionCounts::new(), |a, b| a.merge(b));
    Ok(MetricsReport::from_confusion(total, gold.len()))
}
