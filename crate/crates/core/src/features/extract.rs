use std::sync::LazyLock;

use regex::Regex;

use super::index::{bin, Raw};
use crate::model::{median, Document, Line, SectionLabel, Token};

static YEAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|\D)(?:1[89]|20)\d{2}(?:\D|$)").unwrap());
static EMAIL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[^@\s]+@[^@\s]+\.[^@\s]+$").unwrap());
static DOI: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"10\.\d{4,9}/\S+").unwrap());

/// Width of the symmetric band around equal margins that counts as centered.
pub const CENTER_TOLERANCE: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capitalization {
    Lower,
    Initial,
    Upper,
    Mixed,
    NoLetters,
}

impl Capitalization {
    pub fn of(s: &str) -> Self {
        let letters: Vec<char> = s.chars().filter(|c| c.is_alphabetic()).collect();
        match letters.as_slice() {
            [] => Capitalization::NoLetters,
            [first, rest @ ..] => {
                if letters.iter().all(|c| c.is_lowercase()) {
                    Capitalization::Lower
                } else if rest.len() > 0 && letters.iter().all(|c| c.is_uppercase()) {
                    Capitalization::Upper
                } else if first.is_uppercase() && rest.iter().all(|c| c.is_lowercase()) {
                    Capitalization::Initial
                } else {
                    Capitalization::Mixed
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Capitalization::Lower => "lower",
            Capitalization::Initial => "init",
            Capitalization::Upper => "upper",
            Capitalization::Mixed => "mixed",
            Capitalization::NoLetters => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineAlignment {
    Left,
    Center,
    Right,
}

impl LineAlignment {
    pub fn name(self) -> &'static str {
        match self {
            LineAlignment::Left => "left",
            LineAlignment::Center => "center",
            LineAlignment::Right => "right",
        }
    }
}

/// Alignment class from margin symmetry.
pub fn alignment(x0: f64, x1: f64, page_width: f64) -> LineAlignment {
    let (left, right) = (x0.max(0.0), (page_width - x1).max(0.0));
    if (left - right).abs() <= CENTER_TOLERANCE * left.max(right) {
        LineAlignment::Center
    } else if left < right {
        LineAlignment::Left
    } else {
        LineAlignment::Right
    }
}

pub fn is_year(s: &str) -> bool {
    YEAR.is_match(s)
}

pub fn is_email(s: &str) -> bool {
    EMAIL.is_match(s)
}

pub fn is_doi(s: &str) -> bool {
    DOI.is_match(s)
}

pub fn length_bucket(n: usize) -> &'static str {
    match n {
        0 | 1 => "1",
        2..=4 => "2-4",
        5..=8 => "5-8",
        _ => "9+",
    }
}

/// Page-level statistics shared by all lines and words.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PageContext {
    pub width: f64,
    pub height: f64,
    pub median_font: f64,
}

impl PageContext {
    pub fn of(doc: &Document) -> Self {
        let mut fonts: Vec<f64> = doc.tokens.iter().map(|t| t.font_size).collect();
        let m = median(&mut fonts);
        PageContext {
            width: doc.page.width,
            height: doc.page.height,
            median_font: if m > 0.0 { m } else { 1.0 },
        }
    }
}

fn ratio_class(r: f64) -> &'static str {
    if r >= 1.0 {
        "all"
    } else if r > 0.0 {
        "some"
    } else {
        "none"
    }
}

fn gap_bucket(g: Option<f64>) -> String {
    match g {
        None => "edge".into(),
        Some(g) if g < 0.5 => "0".into(),
        Some(g) if g < 1.5 => "1".into(),
        Some(g) if g < 3.0 => "2".into(),
        Some(_) => "3+".into(),
    }
}

/// Features of one line. `above`/`below` are the neighbouring lines, if any.
pub fn line_features(tokens: &[&Token], above: Option<&Line>, below: Option<&Line>, page: &PageContext) -> Vec<Raw> {
    let n = tokens.len().max(1) as f64;
    let x0 = tokens.iter().map(|t| t.bbox.x0).fold(f64::INFINITY, f64::min);
    let x1 = tokens.iter().map(|t| t.bbox.x1).fold(f64::NEG_INFINITY, f64::max);
    let y0 = tokens.iter().map(|t| t.bbox.y0).fold(f64::INFINITY, f64::min);
    let y1 = tokens.iter().map(|t| t.bbox.y1).fold(f64::NEG_INFINITY, f64::max);
    let height = (y1 - y0).max(1e-6);
    let mean_font = tokens.iter().map(|t| t.font_size).sum::<f64>() / n;
    let rel_font = mean_font / page.median_font;
    let bold = tokens.iter().filter(|t| t.bold).count() as f64 / n;
    let italic = tokens.iter().filter(|t| t.italic).count() as f64 / n;
    let y_pos = y0 / page.height;
    let gap_above = above.map(|l| ((y0 - l.bbox.y1) / height).clamp(0.0, 10.0));
    let gap_below = below.map(|l| ((l.bbox.y0 - y1) / height).clamp(0.0, 10.0));
    let font_bucket = match rel_font {
        r if r < 0.85 => "small",
        r if r < 1.15 => "normal",
        r if r < 1.5 => "large",
        _ => "huge",
    };
    let count_bucket = match tokens.len() {
        0..=1 => "1",
        2..=3 => "2-3",
        4..=7 => "4-7",
        _ => "8+",
    };
    let mut f = vec![
        bin("bias"),
        Raw::Real("rel_font", rel_font),
        bin(format!("font_rel={font_bucket}")),
        bin(format!("font={}", mean_font.round() as i64)),
        Raw::Real("bold_ratio", bold),
        bin(format!("bold={}", ratio_class(bold))),
        Raw::Real("italic_ratio", italic),
        bin(format!("italic={}", ratio_class(italic))),
        bin(format!("align={}", alignment(x0, x1, page.width).name())),
        Raw::Real("y_pos", y_pos),
        bin(format!("y_bucket={}", ((y_pos * 10.0).floor() as i64).clamp(0, 9))),
        Raw::Real("x_pos", x0 / page.width),
        Raw::Real("line_width", (x1 - x0) / page.width),
        Raw::Real("token_count", tokens.len() as f64),
        bin(format!("tokens={count_bucket}")),
        bin(format!("gap_above={}", gap_bucket(gap_above))),
        bin(format!("gap_below={}", gap_bucket(gap_below))),
    ];
    if let Some(g) = gap_above {
        f.push(Raw::Real("gap_above", g));
    }
    if let Some(g) = gap_below {
        f.push(Raw::Real("gap_below", g));
    }
    let text: String = tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    if tokens.iter().any(|t| is_email(&t.text)) {
        f.push(bin("line_has_email"));
    }
    if tokens.iter().any(|t| is_doi(&t.text)) {
        f.push(bin("line_has_doi"));
    }
    if is_year(&text) {
        f.push(bin("line_has_year"));
    }
    if let Some(t) = tokens.first() {
        f.push(bin(format!("first_word={}", t.text.to_lowercase())));
    }
    f
}

/// Line features for every line of a document, in `line_id` order.
pub fn document_line_features(doc: &Document) -> (Vec<Line>, Vec<Vec<Raw>>) {
    let page = PageContext::of(doc);
    let lines = doc.lines();
    let feats = (0..lines.len())
        .map(|i| {
            let toks: Vec<&Token> = lines[i].token_indices.iter().map(|&k| &doc.tokens[k]).collect();
            let above = i.checked_sub(1).map(|j| &lines[j]);
            line_features(&toks, above, lines.get(i + 1), &page)
        })
        .collect();
    (lines, feats)
}

fn suffix(s: &str, n: usize) -> String {
    let cs: Vec<char> = s.chars().collect();
    cs[cs.len().saturating_sub(n)..].iter().collect()
}

fn word_key(s: &str) -> String {
    let t: String = s
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    if t.chars().all(|c| c.is_ascii_digit()) && !t.is_empty() {
        "<num>".into()
    } else {
        t
    }
}

/// Features of one token given its neighbours in reading order.
pub fn word_features(token: &Token, prev: Option<&Token>, next: Option<&Token>, page: &PageContext) -> Vec<Raw> {
    let s = token.text.as_str();
    let len = s.chars().count();
    let cap = Capitalization::of(s);
    let mut f = vec![
        bin("bias"),
        bin(format!("len={}", length_bucket(len))),
        bin(format!("cap={}", cap.name())),
        bin(format!("w={}", word_key(s))),
        bin(format!("suffix={}", suffix(&s.to_lowercase(), 3))),
        bin(format!("font={}", token.font_size.round() as i64)),
        Raw::Real("rel_font", token.font_size / page.median_font),
        Raw::Real("y_pos", token.bbox.y0 / page.height),
        Raw::Real("x_pos", token.bbox.x0 / page.width),
    ];
    if is_year(s) {
        f.push(bin("is_year"));
    }
    if s.chars().any(|c| c.is_ascii_digit()) {
        f.push(bin("has_digit"));
    }
    if s.chars().any(|c| !c.is_alphanumeric()) {
        f.push(bin("has_special"));
    }
    if is_email(s) {
        f.push(bin("email"));
    }
    if is_doi(s) {
        f.push(bin("doi"));
    }
    if token.bold {
        f.push(bin("bold"));
    }
    if token.italic {
        f.push(bin("italic"));
    }
    match prev {
        Some(p) => {
            f.push(bin(format!("prev_cap={}", Capitalization::of(&p.text).name())));
            f.push(bin(format!("prev_w={}", word_key(&p.text))));
            if p.line_id != token.line_id {
                f.push(bin("line_start"));
            }
        }
        None => f.push(bin("prev=<bos>")),
    }
    match next {
        Some(n) => {
            f.push(bin(format!("next_cap={}", Capitalization::of(&n.text).name())));
            f.push(bin(format!("next_w={}", word_key(&n.text))));
            if n.line_id != token.line_id {
                f.push(bin("line_end"));
            }
        }
        None => f.push(bin("next=<eos>")),
    }
    f
}

/// Word features for every token; `sections` adds the section name as a feature.
pub fn document_word_features(doc: &Document, sections: Option<&[SectionLabel]>) -> Vec<Vec<Raw>> {
    let page = PageContext::of(doc);
    let t = &doc.tokens;
    (0..t.len())
        .map(|i| {
            let prev = i.checked_sub(1).map(|j| &t[j]);
            let mut f = word_features(&t[i], prev, t.get(i + 1), &page);
            if let Some(s) = sections {
                f.push(bin(format!("section={}", s[i].name())));
            }
            f
        })
        .collect()
}
