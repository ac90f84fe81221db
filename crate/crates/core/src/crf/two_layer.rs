use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{CrfFile, CrfModel};
use super::train::{train_crf, CrfTrainConfig, CrfTrainReport, Sequence};
use crate::error::{Error, Result};
use crate::features::{document_line_features, document_word_features, Raw};
use crate::model::{Document, Label, SectionLabel};

pub const PIPELINE_FORMAT: &str = "metaforge-crf-pipeline/1";

/// Line-level section CRF feeding a word-level label CRF.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLayerPipeline {
    pub layer1: CrfModel,
    pub layer2: CrfModel,
    pub excluded: Vec<SectionLabel>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerReport {
    pub layer1: CrfTrainReport,
    pub layer2: CrfTrainReport,
}

/// Per-token output of the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoLayerOutput {
    pub sections: Vec<SectionLabel>,
    pub labels: Vec<Label>,
}

pub fn default_excluded() -> Vec<SectionLabel> {
    vec![SectionLabel::Footnote]
}

fn names<T: ToString>(xs: &[T]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

/// Section of each line by majority over its tokens; ties go to the lower section index.
fn line_sections(lines: &[crate::model::Line], token_sections: &[SectionLabel]) -> Vec<usize> {
    lines
        .iter()
        .map(|line| {
            let mut counts = [0usize; SectionLabel::COUNT];
            for &i in &line.token_indices {
                counts[token_sections[i].index()] += 1;
            }
            (0..SectionLabel::COUNT).max_by_key(|&k| (counts[k], std::cmp::Reverse(k))).unwrap()
        })
        .collect()
}

/// Maximal runs of equal, non-excluded sections as `(start, end)` token ranges.
pub fn section_segments(sections: &[SectionLabel], excluded: &[SectionLabel]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sections.len() {
        let mut j = i + 1;
        while j < sections.len() && sections[j] == sections[i] {
            j += 1;
        }
        if !excluded.contains(&sections[i]) {
            out.push((i, j));
        }
        i = j;
    }
    out
}

fn layer1_sequence(doc: &Document) -> Sequence {
    let (lines, features) = document_line_features(doc);
    let labels = line_sections(&lines, &doc.token_sections());
    Sequence { features, labels }
}

fn layer2_sequences(doc: &Document, sections: &[SectionLabel], excluded: &[SectionLabel]) -> Vec<Sequence> {
    let feats = document_word_features(doc, Some(sections));
    let gold = doc.token_labels();
    section_segments(sections, excluded)
        .into_iter()
        .map(|(s, e)| Sequence {
            features: feats[s..e].to_vec(),
            labels: gold[s..e].iter().map(|l| l.index()).collect(),
        })
        .collect()
}

/// Trains both layers. The word layer sees gold sections.
pub fn train_two_layer(
    docs: &[Document],
    cfg: &CrfTrainConfig,
    excluded: &[SectionLabel],
) -> Result<(TwoLayerPipeline, TwoLayerReport)> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot train on an empty corpus"));
    }
    let l1: Vec<Sequence> = docs.par_iter().map(layer1_sequence).filter(|s| !s.labels.is_empty()).collect();
    let l2: Vec<Sequence> = docs
        .par_iter()
        .map(|d| layer2_sequences(d, &d.token_sections(), excluded))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if l2.is_empty() {
        return Err(Error::invalid("no tokens outside the excluded sections"));
    }
    let (layer1, r1) = train_crf(names(&SectionLabel::ALL), &l1, cfg)?;
    let (layer2, r2) = train_crf(names(&Label::ALL), &l2, cfg)?;
    Ok((
        TwoLayerPipeline {
            layer1,
            layer2,
            excluded: excluded.to_vec(),
        },
        TwoLayerReport { layer1: r1, layer2: r2 },
    ))
}

impl TwoLayerPipeline {
    /// Section per token from the line layer.
    pub fn predict_sections(&self, doc: &Document) -> Vec<SectionLabel> {
        let (lines, feats) = document_line_features(doc);
        let x: Vec<_> = feats.iter().map(|f| self.layer1.index.vectorize(f)).collect();
        let path = self.layer1.viterbi(&x);
        let mut out = vec![SectionLabel::Body; doc.tokens.len()];
        for (line, s) in lines.iter().zip(path) {
            for &i in &line.token_indices {
                out[i] = SectionLabel::from_index(s).unwrap();
            }
        }
        out
    }

    /// Word-layer labels given per-token sections; excluded sections become `Other`.
    pub fn label_with_sections(&self, doc: &Document, sections: &[SectionLabel]) -> Vec<Label> {
        let feats: Vec<Vec<Raw>> = document_word_features(doc, Some(sections));
        let mut out = vec![Label::Other; doc.tokens.len()];
        for (s, e) in section_segments(sections, &self.excluded) {
            let x: Vec<_> = feats[s..e].iter().map(|f| self.layer2.index.vectorize(f)).collect();
            for (k, y) in self.layer2.viterbi(&x).into_iter().enumerate() {
                out[s + k] = Label::from_index(y).unwrap();
            }
        }
        out
    }

    pub fn extract(&self, doc: &Document) -> TwoLayerOutput {
        let sections = self.predict_sections(doc);
        let labels = self.label_with_sections(doc, &sections);
        TwoLayerOutput { sections, labels }
    }

    pub fn to_json(&self) -> Result<String> {
        let f = PipelineFile {
            format: PIPELINE_FORMAT.into(),
            layer1: self.layer1.to_file(),
            layer2: self.layer2.to_file(),
            excluded: self.excluded.clone(),
        };
        Ok(serde_json::to_string(&f)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PipelineFile = serde_json::from_str(text)?;
        if f.format != PIPELINE_FORMAT {
            return Err(Error::invalid(format!("unsupported pipeline format {:?}", f.format)));
        }
        let p = TwoLayerPipeline {
            layer1: CrfModel::from_file(f.layer1)?,
            layer2: CrfModel::from_file(f.layer2)?,
            excluded: f.excluded,
        };
        if p.layer1.labels != names(&SectionLabel::ALL) || p.layer2.labels != names(&Label::ALL) {
            return Err(Error::invalid("pipeline layers have unexpected label sets"));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TwoLayerPipeline::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct PipelineFile {
    format: String,
    layer1: CrfFile,
    layer2: CrfFile,
    excluded: Vec<SectionLabel>,
}
