use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gateway::{fetch_metadata, GatewayRecord, MetadataGateway};
use super::text::{levenshtein_similarity, normalize_text};
use crate::error::{Error, Result};
use crate::model::{Annotation, BBox, Document, Label, Token};

/// Fields are matched in this order; matched tokens are masked for later fields.
pub const MATCH_ORDER: [Label; 9] = [
    Label::Title,
    Label::Abstract,
    Label::Authors,
    Label::Journal,
    Label::Affiliation,
    Label::Address,
    Label::Email,
    Label::Date,
    Label::Doi,
];

pub const WINDOW_SLACK: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Fuzzy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub label: Label,
    /// Half-open token range `[start, end)`.
    pub token_span: (usize, usize),
    pub similarity: f64,
    pub kind: MatchKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignThresholds {
    pub default: f64,
    /// Structured identifiers only match verbatim by default.
    pub doi: f64,
}

impl Default for AlignThresholds {
    fn default() -> Self {
        AlignThresholds {
            default: 0.85,
            doi: 1.0,
        }
    }
}

impl AlignThresholds {
    pub fn uniform(t: f64) -> Self {
        AlignThresholds { default: t, doi: t }
    }

    pub fn for_label(&self, l: Label) -> f64 {
        if l == Label::Doi {
            self.doi
        } else {
            self.default
        }
    }
}

fn char_histogram(s: &str) -> [u32; 64] {
    let mut h = [0u32; 64];
    for c in s.chars() {
        h[(c as u32 % 64) as usize] += 1;
    }
    h
}

/// Lower bound on the edit distance from bucketed character counts.
fn histogram_bound(a: &[u32; 64], b: &[u32; 64]) -> usize {
    let (mut pos, mut neg) = (0u32, 0u32);
    for (x, y) in a.iter().zip(b) {
        if x > y {
            pos += x - y;
        } else {
            neg += y - x;
        }
    }
    pos.max(neg) as usize
}

/// Locates `field` in a normalized token stream.
///
/// A verbatim contiguous match wins. Otherwise every unmasked window of
/// `|field tokens| ± 2` tokens is scored by normalized Levenshtein similarity
/// and the best window at or above `threshold` is returned; on ties the
/// leftmost (then shortest) window wins. Masked tokens never take part.
pub fn find_field_span(
    label: Label,
    tokens: &[String],
    mask: &[bool],
    field: &str,
    threshold: f64,
) -> Option<MatchResult> {
    let field_tokens: Vec<&str> = field.split(' ').filter(|s| !s.is_empty()).collect();
    let k = field_tokens.len();
    let n = tokens.len();
    if k == 0 || n == 0 {
        return None;
    }
    let free = |s: usize, e: usize| !mask[s..e].iter().any(|&m| m);

    if k <= n {
        for s in 0..=n - k {
            if free(s, s + k) && tokens[s..s + k].iter().zip(&field_tokens).all(|(a, b)| a == b) {
                return Some(MatchResult {
                    label,
                    token_span: (s, s + k),
                    similarity: 1.0,
                    kind: MatchKind::Exact,
                });
            }
        }
    }
    fuzzy_scan(label, tokens, mask, field, k, threshold)
}

fn fuzzy_scan(
    label: Label,
    tokens: &[String],
    mask: &[bool],
    field: &str,
    k: usize,
    threshold: f64,
) -> Option<MatchResult> {
    let n = tokens.len();
    let field_len = field.chars().count();
    let field_hist = char_histogram(field);
    let lo = k.saturating_sub(WINDOW_SLACK).max(1);
    let hi = k + WINDOW_SLACK;
    let mut best: Option<MatchResult> = None;
    for s in 0..n {
        for w in lo..=hi {
            let e = s + w;
            if e > n {
                break;
            }
            if mask[s..e].iter().any(|&m| m) {
                break;
            }
            let text = tokens[s..e].join(" ");
            let len = text.chars().count();
            let longest = len.max(field_len) as f64;
            let floor = best.as_ref().map_or(threshold, |b| b.similarity.max(threshold));
            // cheap upper bounds before the quadratic DP
            let len_bound = 1.0 - (len.abs_diff(field_len)) as f64 / longest;
            if len_bound < floor {
                continue;
            }
            let hist_bound = 1.0 - histogram_bound(&char_histogram(&text), &field_hist) as f64 / longest;
            if hist_bound < floor {
                continue;
            }
            let sim = levenshtein_similarity(&text, field);
            let better = match &best {
                None => sim >= threshold,
                Some(b) => sim > b.similarity,
            };
            if better {
                best = Some(MatchResult {
                    label,
                    token_span: (s, e),
                    similarity: sim,
                    kind: if sim >= 1.0 { MatchKind::Exact } else { MatchKind::Fuzzy },
                });
            }
        }
    }
    best
}

/// Tight union of the boxes of tokens `[start, end)`.
pub fn map_span_to_bbox(span: (usize, usize), tokens: &[Token]) -> Result<BBox> {
    let (s, e) = span;
    if s >= e || e > tokens.len() {
        return Err(Error::invalid(format!("bad span [{s}, {e}) over {} tokens", tokens.len())));
    }
    Ok(BBox::union_all(tokens[s..e].iter().map(|t| &t.bbox)).unwrap())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub id: String,
    pub doi: String,
    pub matched: Vec<MatchResult>,
    pub unmatched: Vec<Label>,
}

#[derive(Clone, Debug)]
pub enum AlignOutcome {
    Accepted(Document, AlignmentReport),
    /// Nothing matched; the document belongs in the rejects file.
    Rejected(AlignmentReport),
}

/// Annotates `doc` with the spans of every field of `record` found on the page.
pub fn build_record(doc: &Document, record: &GatewayRecord, thresholds: &AlignThresholds) -> Result<AlignOutcome> {
    let norm: Vec<String> = doc.tokens.iter().map(|t| normalize_text(&t.text)).collect();
    let mut mask = vec![false; norm.len()];
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for &label in &MATCH_ORDER {
        let Some(value) = record.metadata.get(label) else {
            continue;
        };
        let field = normalize_text(value);
        if field.is_empty() {
            continue;
        }
        match find_field_span(label, &norm, &mask, &field, thresholds.for_label(label)) {
            Some(m) => {
                for slot in &mut mask[m.token_span.0..m.token_span.1] {
                    *slot = true;
                }
                matched.push(m);
            }
            None => unmatched.push(label),
        }
    }
    let report = AlignmentReport {
        id: doc.id.clone(),
        doi: record.doi.clone(),
        matched,
        unmatched,
    };
    if report.matched.is_empty() {
        return Ok(AlignOutcome::Rejected(report));
    }
    let mut out = doc.clone();
    out.annotations = report
        .matched
        .iter()
        .map(|m| Annotation::from_tokens(m.label, (m.token_span.0..m.token_span.1).collect(), &doc.tokens))
        .collect::<Result<_>>()?;
    out.annotations.sort_by_key(|a| a.token_indices[0]);
    out.metadata = Some(record.metadata.clone());
    out.validate()?;
    Ok(AlignOutcome::Accepted(out, report))
}

/// DOI of an input document: its metadata DOI if present, else its id.
pub fn document_doi(doc: &Document) -> &str {
    doc.metadata
        .as_ref()
        .and_then(|m| m.doi.as_deref())
        .unwrap_or(&doc.id)
}

/// Result for one input document of [`align_corpus`].
#[derive(Debug)]
pub enum CorpusAlignment {
    Accepted(Document, AlignmentReport),
    Rejected(AlignmentReport),
    Failed { id: String, error: Error },
}

/// Fetches and aligns every document in parallel; output keeps input order.
pub fn align_corpus(docs: &[Document], gateway: &dyn MetadataGateway, thresholds: &AlignThresholds) -> Vec<CorpusAlignment> {
    docs.par_iter()
        .map(|d| {
            let result = fetch_metadata(document_doi(d), gateway).and_then(|r| build_record(d, &r, thresholds));
            match result {
                Ok(AlignOutcome::Accepted(doc, rep)) => CorpusAlignment::Accepted(doc, rep),
                Ok(AlignOutcome::Rejected(rep)) => CorpusAlignment::Rejected(rep),
                Err(error) => CorpusAlignment::Failed { id: d.id.clone(), error },
            }
        })
        .collect()
}
