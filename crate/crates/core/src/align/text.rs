use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

/// A letter, a hard or soft hyphen, then a line break.
static HYPHEN_BREAK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\p{L})[-\u{00AD}][ \t]*\r?\n\s*(\p{L})").unwrap());

/// Canonical text form used on both sides of every comparison.
///
/// NFC composition, hyphenated line breaks joined, stray soft hyphens dropped,
/// whitespace runs collapsed to one space, ends trimmed.
pub fn normalize_text(s: &str) -> String {
    let composed: String = s.nfc().collect();
    let joined = HYPHEN_BREAK.replace_all(&composed, "$1$2");
    let mut out = String::with_capacity(joined.len());
    for word in joined.split_whitespace() {
        let word: String = word.chars().filter(|&c| c != '\u{00AD}').collect();
        if word.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&word);
    }
    // dropping soft hyphens can expose new composable pairs
    out.nfc().collect()
}

/// Character-level edit distance (unit insert/delete/substitute).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 − dist/max(|a|,|b|)`, with two empty strings fully similar.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    let la = a.chars().count();
    let lb = b.chars().count();
    let longest = la.max(lb);
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}
