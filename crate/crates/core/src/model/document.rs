use serde::{Deserialize, Serialize};

use super::geometry::BBox;
use super::label::{Label, SectionLabel};
use super::raster::GrayImage;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub bbox: BBox,
    pub font_size: f64,
    #[serde(default)]
    pub bold: bool,
    #[serde(default)]
    pub italic: bool,
    #[serde(default)]
    pub line_id: usize,
    #[serde(default)]
    pub block_id: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, bbox: BBox, font_size: f64) -> Self {
        Token {
            text: text.into(),
            bbox,
            font_size,
            bold: false,
            italic: false,
            line_id: 0,
            block_id: 0,
        }
    }

    pub fn y_center(&self) -> f64 {
        (self.bbox.y0 + self.bbox.y1) / 2.0
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Page {
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster_path: Option<String>,
    #[serde(skip)]
    pub raster: Option<GrayImage>,
}

impl PartialEq for Page {
    // the raster is a cache of `raster_path` and does not take part in identity
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.raster_path == other.raster_path
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: Label,
    pub token_indices: Vec<usize>,
    pub bbox: BBox,
    /// Page section the span was laid out in; defaults to the label's usual section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionLabel>,
    /// Set when the generator could not fit the full field text into its region.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

impl Annotation {
    /// Builds an annotation whose bbox is the tight union of its tokens.
    pub fn from_tokens(label: Label, mut token_indices: Vec<usize>, tokens: &[Token]) -> Result<Self> {
        token_indices.sort_unstable();
        token_indices.dedup();
        let bbox = BBox::union_all(token_indices.iter().map(|&i| &tokens[i].bbox))
            .ok_or_else(|| Error::invalid("annotation without tokens"))?;
        Ok(Annotation {
            label,
            token_indices,
            bbox,
            section: None,
            truncated: false,
        })
    }

    pub fn section(&self) -> SectionLabel {
        self.section.unwrap_or_else(|| self.label.default_section())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, rename = "abstract", skip_serializing_if = "Option::is_none")]
    pub abstract_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
}

impl MetadataRecord {
    pub fn get(&self, label: Label) -> Option<&str> {
        let v = match label {
            Label::Title => &self.title,
            Label::Abstract => &self.abstract_text,
            Label::Authors => &self.authors,
            Label::Email => &self.email,
            Label::Address => &self.address,
            Label::Date => &self.date,
            Label::Journal => &self.journal,
            Label::Affiliation => &self.affiliation,
            Label::Doi => &self.doi,
            Label::Other => return None,
        };
        v.as_deref()
    }

    /// Stores a field; empty strings clear it. `Other` is ignored.
    pub fn set(&mut self, label: Label, value: Option<String>) {
        let value = value.filter(|s| !s.trim().is_empty());
        let slot = match label {
            Label::Title => &mut self.title,
            Label::Abstract => &mut self.abstract_text,
            Label::Authors => &mut self.authors,
            Label::Email => &mut self.email,
            Label::Address => &mut self.address,
            Label::Date => &mut self.date,
            Label::Journal => &mut self.journal,
            Label::Affiliation => &mut self.affiliation,
            Label::Doi => &mut self.doi,
            Label::Other => return,
        };
        *slot = value;
    }

    pub fn present(&self) -> impl Iterator<Item = (Label, &str)> + '_ {
        Label::METADATA
            .iter()
            .filter_map(move |&l| self.get(l).map(|v| (l, v)))
    }

    pub fn is_empty(&self) -> bool {
        self.present().next().is_none()
    }
}

/// Horizontal band of tokens sharing a `line_id`.
#[derive(Clone, Debug, PartialEq)]
pub struct Line {
    pub id: usize,
    pub token_indices: Vec<usize>,
    pub bbox: BBox,
}

/// Group of vertically adjacent lines sharing a `block_id`.
#[derive(Clone, Debug, PartialEq)]
pub struct TextBlock {
    pub id: usize,
    pub token_indices: Vec<usize>,
    pub bbox: BBox,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub page: Page,
    #[serde(default)]
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<MetadataRecord>,
}

impl Document {
    pub fn new(id: impl Into<String>, width: f64, height: f64, tokens: Vec<Token>) -> Self {
        Document {
            id: id.into(),
            page: Page {
                width,
                height,
                raster_path: None,
                raster: None,
            },
            tokens,
            annotations: Vec::new(),
            metadata: None,
        }
    }

    /// Gold label per token; tokens outside every annotation are `Other`.
    pub fn token_labels(&self) -> Vec<Label> {
        let mut out = vec![Label::Other; self.tokens.len()];
        for a in &self.annotations {
            for &i in &a.token_indices {
                if let Some(slot) = out.get_mut(i) {
                    *slot = a.label;
                }
            }
        }
        out
    }

    /// Gold section per token, derived from annotations.
    pub fn token_sections(&self) -> Vec<SectionLabel> {
        let mut out = vec![SectionLabel::Body; self.tokens.len()];
        for a in &self.annotations {
            let s = a.section();
            for &i in &a.token_indices {
                if let Some(slot) = out.get_mut(i) {
                    *slot = s;
                }
            }
        }
        out
    }

    /// Lines in `line_id` order. Assumes line ids have been assigned.
    pub fn lines(&self) -> Vec<Line> {
        collect_groups(&self.tokens, |t| t.line_id)
            .into_iter()
            .map(|(id, token_indices, bbox)| Line {
                id,
                token_indices,
                bbox,
            })
            .collect()
    }

    /// Blocks in `block_id` order. Assumes block ids have been assigned.
    pub fn blocks(&self) -> Vec<TextBlock> {
        collect_groups(&self.tokens, |t| t.block_id)
            .into_iter()
            .map(|(id, token_indices, bbox)| {
                let text = join_tokens(&self.tokens, &token_indices);
                TextBlock {
                    id,
                    token_indices,
                    bbox,
                    text,
                }
            })
            .collect()
    }

    pub fn annotation_text(&self, a: &Annotation) -> String {
        join_tokens(&self.tokens, &a.token_indices)
    }

    /// Checks the structural invariants of a document.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("document {}: {m}", self.id)));
        if !(self.page.width > 0.0 && self.page.height > 0.0) {
            return bad("page dimensions must be positive".into());
        }
        if let Some(r) = &self.page.raster {
            let want = self.page.width / self.page.height;
            let got = r.width as f64 / r.height as f64;
            if ((got - want) / want).abs() > 0.01 {
                return bad(format!("raster aspect {got:.4} does not match page {want:.4}"));
            }
        }
        for (i, t) in self.tokens.iter().enumerate() {
            if t.text.is_empty() || t.text.chars().any(char::is_whitespace) {
                return bad(format!("token {i} text {:?} is empty or has whitespace", t.text));
            }
            if !t.bbox.is_valid() || !t.bbox.within(self.page.width + 1e-6, self.page.height + 1e-6) {
                return bad(format!("token {i} bbox {:?} is invalid or off-page", t.bbox));
            }
            if !(t.font_size > 0.0) {
                return bad(format!("token {i} font size must be positive"));
            }
        }
        let mut owner = vec![false; self.tokens.len()];
        for (k, a) in self.annotations.iter().enumerate() {
            if a.token_indices.is_empty() {
                return bad(format!("annotation {k} is empty"));
            }
            if a.token_indices.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("annotation {k} indices are not sorted"));
            }
            for &i in &a.token_indices {
                if i >= self.tokens.len() {
                    return bad(format!("annotation {k} index {i} out of range"));
                }
                if owner[i] {
                    return bad(format!("token {i} belongs to two annotations"));
                }
                owner[i] = true;
            }
            let tight = BBox::union_all(a.token_indices.iter().map(|&i| &self.tokens[i].bbox)).unwrap();
            if tight != a.bbox {
                return bad(format!("annotation {k} bbox is not the tight token union"));
            }
        }
        Ok(())
    }
}

pub(crate) fn join_tokens(tokens: &[Token], idx: &[usize]) -> String {
    let mut s = String::new();
    for (k, &i) in idx.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        s.push_str(&tokens[i].text);
    }
    s
}

fn collect_groups(tokens: &[Token], key: impl Fn(&Token) -> usize) -> Vec<(usize, Vec<usize>, BBox)> {
    let mut groups: std::collections::BTreeMap<usize, (Vec<usize>, BBox)> = Default::default();
    for (i, t) in tokens.iter().enumerate() {
        groups
            .entry(key(t))
            .and_modify(|(idx, b)| {
                idx.push(i);
                *b = b.union(&t.bbox);
            })
            .or_insert_with(|| (vec![i], t.bbox));
    }
    groups.into_iter().map(|(k, (idx, b))| (k, idx, b)).collect()
}
