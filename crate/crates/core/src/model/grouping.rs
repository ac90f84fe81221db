//! Deterministic token → line → block grouping.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::document::Token;

/// Grouping thresholds, overridable per run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupingConfig {
    /// Tokens join a line when their vertical centres differ by less than
    /// this multiple of the median font size.
    pub line_tolerance: f64,
    /// Lines join a block when the vertical gap is below this multiple of the
    /// median line height...
    pub block_gap: f64,
    /// ...and their horizontal overlap exceeds this fraction of the narrower line.
    pub block_overlap: f64,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        GroupingConfig {
            line_tolerance: 0.5,
            block_gap: 1.5,
            block_overlap: 0.3,
        }
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

fn reading_key(a: &Token, b: &Token) -> Ordering {
    a.y_center()
        .total_cmp(&b.y_center())
        .then(a.bbox.x0.total_cmp(&b.bbox.x0))
        .then(a.bbox.x1.total_cmp(&b.bbox.x1))
        .then(a.bbox.y0.total_cmp(&b.bbox.y0))
        .then_with(|| a.text.cmp(&b.text))
}

/// Assigns dense line ids to tokens already sorted by `(y-centre, x0)`.
///
/// Two tokens share a line iff they are connected through a chain of
/// neighbours whose centres differ by less than `line_tolerance × median
/// font size`; on sorted input that closure is a split at large gaps.
pub fn group_into_lines(mut tokens: Vec<Token>, cfg: &GroupingConfig) -> Vec<Token> {
    if tokens.is_empty() {
        return tokens;
    }
    let mut sizes: Vec<f64> = tokens.iter().map(|t| t.font_size).collect();
    let tol = cfg.line_tolerance * median(&mut sizes);
    let mut line = 0;
    let mut prev = tokens[0].y_center();
    for t in tokens.iter_mut() {
        let y = t.y_center();
        if (y - prev).abs() >= tol {
            line += 1;
        }
        prev = y;
        t.line_id = line;
    }
    tokens
}

/// Assigns dense block ids from line ids.
pub fn group_into_blocks(mut tokens: Vec<Token>, cfg: &GroupingConfig) -> Vec<Token> {
    if tokens.is_empty() {
        return tokens;
    }
    // line boxes in line-id order
    let mut lines: std::collections::BTreeMap<usize, super::BBox> = Default::default();
    for t in &tokens {
        lines
            .entry(t.line_id)
            .and_modify(|b| *b = b.union(&t.bbox))
            .or_insert(t.bbox);
    }
    let boxes: Vec<(usize, super::BBox)> = lines.into_iter().collect();
    let mut heights: Vec<f64> = boxes.iter().map(|(_, b)| b.height()).collect();
    let max_gap = cfg.block_gap * median(&mut heights);

    let mut line_block = std::collections::BTreeMap::new();
    let mut block = 0;
    line_block.insert(boxes[0].0, 0);
    for l in 1..boxes.len() {
        let (a, b) = (&boxes[l - 1].1, &boxes[l].1);
        let gap = b.y0 - a.y1;
        let overlap = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
        let narrower = a.width().min(b.width());
        let joined = gap < max_gap && narrower > 0.0 && overlap / narrower > cfg.block_overlap;
        if !joined {
            block += 1;
        }
        line_block.insert(boxes[l].0, block);
    }
    for t in tokens.iter_mut() {
        t.block_id = line_block[&t.line_id];
    }
    tokens
}

/// Sorts tokens into reading order and assigns line and block ids.
///
/// Returns the ordered tokens and `perm`, where `perm[k]` is the input index
/// of output token `k`. Lines are left-to-right internally.
pub fn arrange(tokens: Vec<Token>, cfg: &GroupingConfig) -> (Vec<Token>, Vec<usize>) {
    let mut indexed: Vec<(usize, Token)> = tokens.into_iter().enumerate().collect();
    indexed.sort_by(|a, b| reading_key(&a.1, &b.1).then(a.0.cmp(&b.0)));
    let (perm, sorted): (Vec<usize>, Vec<Token>) = indexed.into_iter().unzip();
    let lined = group_into_lines(sorted, cfg);

    // re-sort within each line by x0 so jittered baselines still read left to right
    let mut indexed: Vec<(usize, Token)> = perm.into_iter().zip(lined).collect();
    indexed.sort_by(|a, b| {
        a.1.line_id
            .cmp(&b.1.line_id)
            .then(a.1.bbox.x0.total_cmp(&b.1.bbox.x0))
            .then(reading_key(&a.1, &b.1))
            .then(a.0.cmp(&b.0))
    });
    let (perm, lined): (Vec<usize>, Vec<Token>) = indexed.into_iter().unzip();
    (group_into_blocks(lined, cfg), perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BBox;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tok(x: f64, y: f64, w: f64, h: f64) -> Token {
        Token::new("w", BBox::from_xywh(x, y, w, h), h)
    }

    #[test]
    fn empty_input_is_empty_output() {
        assert!(group_into_lines(vec![], &GroupingConfig::default()).is_empty());
        assert!(group_into_blocks(vec![], &GroupingConfig::default()).is_empty());
    }

    #[test]
    fn same_center_shares_line() {
        let t = group_into_lines(vec![tok(0.0, 10.0, 5.0, 10.0), tok(10.0, 10.0, 5.0, 10.0)], &Default::default());
        assert_eq!(t[0].line_id, t[1].line_id);
    }

    #[test]
    fn two_font_sizes_apart_splits() {
        let t = group_into_lines(vec![tok(0.0, 10.0, 5.0, 10.0), tok(0.0, 30.0, 5.0, 10.0)], &Default::default());
        assert_eq!((t[0].line_id, t[1].line_id), (0, 1));
    }

    /// Brute-force closure: union-find over all pairs satisfying the Δy predicate.
    fn closure_lines(tokens: &[Token], tol: f64) -> Vec<usize> {
        let n = tokens.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        for i in 0..n {
            for j in 0..n {
                if (tokens[i].y_center() - tokens[j].y_center()).abs() < tol {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        // relabel components densely in order of first appearance
        let mut ids = vec![usize::MAX; n];
        let mut next = 0;
        let mut out = vec![0; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            if ids[r] == usize::MAX {
                ids[r] = next;
                next += 1;
            }
            out[i] = ids[r];
        }
        out
    }

    #[test]
    fn random_page_matches_transitive_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut toks: Vec<Token> = (0..50)
                .map(|_| {
                    let h = 10.0;
                    tok(rng.gen_range(0.0..500.0), rng.gen_range(0.0..700.0), 20.0, h)
                })
                .collect();
            toks.sort_by(reading_key);
            let got = group_into_lines(toks.clone(), &Default::default());
            let want = closure_lines(&toks, 5.0);
            let got: Vec<usize> = got.iter().map(|t| t.line_id).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn one_line_one_block_and_far_lines_split() {
        let t = arrange(vec![tok(0.0, 10.0, 50.0, 10.0), tok(60.0, 10.0, 50.0, 10.0)], &Default::default()).0;
        assert!(t.iter().all(|t| t.block_id == 0));
        let t = arrange(vec![tok(0.0, 10.0, 50.0, 10.0), tok(0.0, 70.0, 50.0, 10.0)], &Default::default()).0;
        assert_eq!((t[0].block_id, t[1].block_id), (0, 1));
    }

    #[test]
    fn arrange_is_permutation_insensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let toks: Vec<Token> = (0..60)
            .map(|i| {
                let mut t = tok(rng.gen_range(0.0..500.0), (i / 6) as f64 * 14.0 + rng.gen_range(0.0..2.0), 20.0, 10.0);
                t.text = format!("t{i}");
                t
            })
            .collect();
        let (base, _) = arrange(toks.clone(), &Default::default());
        for _ in 0..5 {
            let mut shuffled = toks.clone();
            shuffled.shuffle(&mut rng);
            let (again, _) = arrange(shuffled, &Default::default());
            assert_eq!(again, base);
        }
    }

    #[test]
    fn lines_read_left_to_right() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let toks: Vec<Token> = (0..40)
            .map(|i| tok((i % 8) as f64 * 30.0, (i / 8) as f64 * 20.0 + rng.gen_range(-1.5..1.5), 25.0, 10.0))
            .collect();
        let (t, perm) = arrange(toks.clone(), &Default::default());
        for w in t.windows(2) {
            if w[0].line_id == w[1].line_id {
                assert!(w[0].bbox.x0 <= w[1].bbox.x0);
            }
        }
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(toks[p].bbox, t[k].bbox);
        }
    }
}
