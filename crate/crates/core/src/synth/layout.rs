//! Typesetting a record into a template and rendering the result.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampler::FieldSampler;
use super::template::{Alignment, Slot, Template};
use crate::align::{levenshtein_similarity, normalize_text};
use crate::error::{Error, Result};
use crate::model::{arrange, pixel_rect, Annotation, BBox, Document, GrayImage, GroupingConfig, Label, MetadataRecord, Token};
use crate::util::rng;

/// Glyph advance as a fraction of the font size.
pub const CHAR_WIDTH: f64 = 0.5;
pub const BOLD_CHAR_WIDTH: f64 = 0.55;
/// Minimum inter-word gap as a fraction of the font size.
pub const WORD_SPACE: f64 = 0.2;
/// Baseline-to-baseline distance as a multiple of the font size.
pub const LINE_PITCH: f64 = 1.1;

pub const INK_BOLD: u8 = 0;
pub const INK_REGULAR: u8 = 60;

/// Layout noise applied after typesetting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Maximum per-token displacement in points, per axis.
    #[serde(default)]
    pub bbox_jitter: f64,
    /// Probability that a token's text receives one character edit.
    #[serde(default)]
    pub corruption: f64,
}

impl NoiseConfig {
    pub fn is_clean(&self) -> bool {
        self.bbox_jitter == 0.0 && self.corruption == 0.0
    }
}

fn word_width(w: &str, font: f64, bold: bool) -> f64 {
    let cw = if bold { BOLD_CHAR_WIDTH } else { CHAR_WIDTH };
    w.chars().count() as f64 * cw * font
}

/// Number of lines greedy wrapping needs at `capacity`, and the words it consumes within `max_lines`.
fn greedy(widths: &[f64], space: f64, capacity: f64, max_lines: usize) -> (usize, usize) {
    let mut lines = 0;
    let mut cur = f64::INFINITY;
    let mut used = 0;
    for &w in widths {
        if cur.is_finite() && cur + space + w <= capacity + 1e-9 {
            cur += space + w;
        } else {
            lines += 1;
            cur = w;
        }
        if lines <= max_lines {
            used += 1;
        }
    }
    (lines, used)
}

/// Splits words into `n` consecutive lines minimizing the widest line.
fn balanced_breaks(widths: &[f64], space: f64, n: usize) -> Vec<usize> {
    let total: f64 = widths.iter().sum::<f64>() + space * widths.len().saturating_sub(1) as f64;
    let widest = widths.iter().cloned().fold(0.0, f64::max);
    let (mut lo, mut hi) = (widest, total);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if greedy(widths, space, mid, usize::MAX).0 <= n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // line start indices under capacity `hi`
    let mut starts = vec![0];
    let mut cur = 0.0;
    for (i, &w) in widths.iter().enumerate() {
        if i == 0 {
            cur = w;
        } else if cur + space + w <= hi + 1e-9 {
            cur += space + w;
        } else {
            starts.push(i);
            cur = w;
        }
    }
    starts
}

struct Typeset {
    tokens: Vec<Token>,
    truncated: bool,
}

/// Wraps `words` into `region`; every line is set to the width of the widest one.
fn typeset(words: &[String], slot: &Slot, region: &BBox) -> Typeset {
    let rw = region.width();
    let mut font = slot.font_size;
    let widest = words.iter().map(|w| word_width(w, font, slot.bold)).fold(0.0, f64::max);
    if widest > rw {
        font *= rw / widest;
    }
    let space = WORD_SPACE * font;
    let pitch = LINE_PITCH * font;
    let widths: Vec<f64> = words.iter().map(|w| word_width(w, font, slot.bold)).collect();
    let max_lines = (((region.height() - font) / pitch).floor().max(0.0) as usize + 1).max(1);
    let (needed, used) = greedy(&widths, space, rw, max_lines);
    let (nlines, used, truncated) = if needed > max_lines {
        (max_lines, used, true)
    } else {
        (needed, widths.len(), false)
    };
    let widths = &widths[..used];
    let starts = balanced_breaks(widths, space, nlines);
    let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(starts.len());
    for (k, &s) in starts.iter().enumerate() {
        let e = starts.get(k + 1).copied().unwrap_or(used);
        ranges.push((s, e));
    }
    let natural = |&(s, e): &(usize, usize)| widths[s..e].iter().sum::<f64>() + space * (e - s - 1) as f64;
    let block_w = ranges.iter().map(natural).fold(0.0, f64::max);
    let x0 = match slot.align {
        Alignment::Left => region.x0,
        Alignment::Center => region.x0 + (rw - block_w) / 2.0,
        Alignment::Right => region.x1 - block_w,
    };
    let mut tokens = Vec::with_capacity(used);
    for (li, &(s, e)) in ranges.iter().enumerate() {
        let n = e - s;
        // short lines are letter-spaced out to the block width
        let ink: f64 = widths[s..e].iter().sum();
        let stretch = (block_w - space * (n - 1) as f64) / ink;
        let mut x = x0;
        let y = region.y0 + li as f64 * pitch;
        for i in s..e {
            let w = widths[i] * stretch;
            let mut t = Token::new(words[i].clone(), BBox::new(x, y, x + w, y + font), font);
            t.bold = slot.bold;
            t.italic = slot.italic;
            t.line_id = li;
            tokens.push(t);
            x += w + space;
        }
    }
    Typeset { tokens, truncated }
}

fn clamp_box(b: BBox, w: f64, h: f64) -> BBox {
    let dx = (-b.x0).max(0.0) - (b.x1 - w).max(0.0);
    let dy = (-b.y0).max(0.0) - (b.y1 - h).max(0.0);
    BBox::new(b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy)
}

/// Typesets `record` into `template`. Slots whose field is missing from the record are skipped.
pub fn layout_page(template: &Template, record: &MetadataRecord, rng_seed: u64) -> Result<Document> {
    layout_with(template, record, &FieldSampler::default(), rng_seed)
}

pub(crate) fn layout_with(
    template: &Template,
    record: &MetadataRecord,
    sampler: &FieldSampler,
    rng_seed: u64,
) -> Result<Document> {
    let (pw, ph) = (template.page_width, template.page_height);
    let mut r = rng(rng_seed);
    let mut tokens: Vec<Token> = Vec::new();
    let mut annotations = Vec::new();
    let mut line_base = 0;
    for (si, slot) in template.slots.iter().enumerate() {
        let j = template.jitter;
        let (dx, dy) = if j > 0.0 {
            (r.gen_range(-j..=j), r.gen_range(-j..=j))
        } else {
            (0.0, 0.0)
        };
        let text = if slot.label == Label::Other {
            sampler.filler(&mut r, slot.filler, slot.words, record)
        } else {
            match record.get(slot.label) {
                Some(v) => v.to_string(),
                None => continue,
            }
        };
        let words: Vec<String> = normalize_text(&text).split(' ').filter(|w| !w.is_empty()).map(String::from).collect();
        if words.is_empty() {
            continue;
        }
        let region = clamp_box(slot.region_box(pw, ph).translate(dx, dy), pw, ph);
        let set = typeset(&words, slot, &region);
        let start = tokens.len();
        let nlines = set.tokens.iter().map(|t| t.line_id + 1).max().unwrap_or(0);
        for mut t in set.tokens {
            t.line_id += line_base;
            t.block_id = si;
            t.bbox = clamp_box(t.bbox, pw, ph);
            tokens.push(t);
        }
        line_base += nlines;
        let mut a = Annotation::from_tokens(slot.label, (start..tokens.len()).collect(), &tokens)?;
        a.section = Some(slot.section());
        a.truncated = set.truncated;
        annotations.push(a);
    }
    let mut doc = Document::new(template.name.clone(), pw, ph, tokens);
    doc.annotations = annotations;
    doc.metadata = Some(record.clone());
    Ok(doc)
}

fn corrupt_word<R: Rng>(r: &mut R, w: &str) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let mut cs: Vec<char> = w.chars().collect();
    let c = ALPHABET[r.gen_range(0..ALPHABET.len())] as char;
    let p = r.gen_range(0..cs.len());
    match r.gen_range(0..4) {
        0 => cs[p] = if cs[p] == c { '#' } else { c },
        1 if cs.len() > 1 => {
            cs.remove(p);
        }
        2 if cs.len() > 1 => {
            let q = if p + 1 < cs.len() { p + 1 } else { p - 1 };
            if cs[p] == cs[q] {
                cs[p] = '#';
            } else {
                cs.swap(p, q);
            }
        }
        _ => cs.insert(p, c),
    }
    cs.into_iter().collect()
}

/// Perturbs token boxes and texts in place, keeping annotations tight.
///
/// Jittered pages lose their generated line and block structure: both are
/// re-derived from the perturbed boxes. Token order is kept.
pub fn apply_noise(doc: &mut Document, noise: &NoiseConfig, rng_seed: u64) {
    if noise.is_clean() {
        return;
    }
    let mut r = rng(rng_seed);
    let (pw, ph) = (doc.page.width, doc.page.height);
    for t in &mut doc.tokens {
        if noise.bbox_jitter > 0.0 {
            let j = noise.bbox_jitter;
            let (dx, dy) = (r.gen_range(-j..=j), r.gen_range(-j..=j));
            t.bbox = clamp_box(t.bbox.translate(dx, dy), pw, ph);
        }
        if noise.corruption > 0.0 && r.gen_bool(noise.corruption.min(1.0)) {
            t.text = corrupt_word(&mut r, &t.text);
        }
    }
    for a in &mut doc.annotations {
        a.bbox = BBox::union_all(a.token_indices.iter().map(|&i| &doc.tokens[i].bbox)).unwrap();
    }
    if noise.bbox_jitter > 0.0 {
        let (grouped, perm) = arrange(doc.tokens.clone(), &GroupingConfig::default());
        for (g, &i) in grouped.iter().zip(&perm) {
            doc.tokens[i].line_id = g.line_id;
            doc.tokens[i].block_id = g.block_id;
        }
    }
}

/// Token rectangles on white, darker for bold.
pub fn rasterize_page(doc: &Document, dpi: i64) -> Result<GrayImage> {
    if dpi <= 0 {
        return Err(Error::invalid(format!("dpi must be positive, got {dpi}")));
    }
    let scale = dpi as f64 / 72.0;
    let cols = (doc.page.width * scale).round().max(1.0) as usize;
    let rows = (doc.page.height * scale).round().max(1.0) as usize;
    let mut img = GrayImage::filled(cols, rows, 255);
    for t in &doc.tokens {
        let ink = if t.bold { INK_BOLD } else { INK_REGULAR };
        let (r0, r1, c0, c1) = pixel_rect(&t.bbox, scale, rows, cols);
        for row in r0..r1 {
            for col in c0..c1 {
                if img.get(row, col) > ink {
                    img.set(row, col, ink);
                }
            }
        }
    }
    Ok(img)
}

/// Labels each block with the most similar record field, or `Other` below `threshold`.
pub fn assign_blocks_by_similarity(blocks: &[String], record: &MetadataRecord, threshold: f64) -> Vec<Label> {
    let fields: Vec<(Label, String)> = Label::METADATA
        .iter()
        .filter_map(|&l| record.get(l).map(|v| (l, normalize_text(v))))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    blocks
        .iter()
        .map(|b| {
            let b = normalize_text(b);
            let mut best = (Label::Other, f64::NEG_INFINITY);
            for (l, v) in &fields {
                // a field much longer or shorter than the block cannot reach the threshold
                let (lb, lv) = (b.chars().count() as f64, v.chars().count() as f64);
                if lb.min(lv) < threshold * lb.max(lv) {
                    continue;
                }
                let s = levenshtein_similarity(&b, v);
                if s > best.1 {
                    best = (*l, s);
                }
            }
            if best.1 >= threshold {
                best.0
            } else {
                Label::Other
            }
        })
        .collect()
}
