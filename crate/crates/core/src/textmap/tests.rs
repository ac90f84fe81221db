use proptest::prelude::*;
use rand::Rng;

use super::attention::visible;
use super::*;
use crate::embeddings::{EmbeddingProvider, Mode, PrecomputedBlocks};
use crate::error::{Error, Result};
use crate::model::{Annotation, BBox, Document, GrayImage, Label, Token};
use crate::nn::{log_softmax, max_rel_error, Mat};
use crate::synth::{builtin_templates, rasterize_page, synthesize_corpus, FieldSampler, NoiseConfig};
use crate::util::{fnv1a, rng};

/// Deterministic pseudo-random vector per word.
struct HashVectors(usize);

impl EmbeddingProvider for HashVectors {
    fn dim(&self) -> usize {
        self.0
    }

    fn mode(&self) -> Mode {
        Mode::PerToken
    }

    fn embed_token(&self, text: &str) -> Result<Vec<f64>> {
        let mut r = rng(fnv1a(text));
        Ok((0..self.0).map(|_| r.gen_range(-1.0..1.0)).collect())
    }

    fn embed_block(&self, _doc: &str, _block: usize, tokens: &[&str]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.0];
        for t in tokens {
            v.iter_mut().zip(self.embed_token(t)?).for_each(|(a, b)| *a += b);
        }
        v.iter_mut().for_each(|a| *a /= tokens.len() as f64);
        Ok(v)
    }
}

fn token(text: &str, x: f64, y: f64, w: f64, h: f64, line: usize, block: usize) -> Token {
    let mut t = Token::new(text, BBox::from_xywh(x, y, w, h), h);
    t.line_id = line;
    t.block_id = block;
    t
}

/// 16×16 pt page with three tokens, rasterized at 72 dpi.
fn mini_doc() -> Document {
    let mut d = Document::new(
        "mini",
        16.0,
        16.0,
        vec![
            token("Alpha", 1.0, 1.0, 6.0, 3.0, 0, 0),
            token("beta@x.org", 8.0, 1.0, 7.0, 3.0, 0, 0),
            token("1999", 2.0, 9.0, 5.0, 4.0, 1, 1),
        ],
    );
    d.tokens[1].bold = true;
    d.annotations = vec![
        Annotation::from_tokens(Label::Title, vec![0], &d.tokens).unwrap(),
        Annotation::from_tokens(Label::Email, vec![1], &d.tokens).unwrap(),
        Annotation::from_tokens(Label::Date, vec![2], &d.tokens).unwrap(),
    ];
    d.page.raster = Some(rasterize_page(&d, 72).unwrap());
    d
}

fn mini_config() -> TextMapConfig {
    TextMapConfig {
        width: 16,
        channels: 4,
        heads: 2,
        hidden: 5,
        neighbors: 2,
        mode: Mode::PerToken,
        shape: true,
        geometry: true,
        nms_iou: 0.5,
    }
}

fn scrambled(m: &TextMapModel, seed: u64, scale: f64) -> TextMapModel {
    let mut r = rng(seed);
    let mut m = m.clone();
    for t in m.tensors_mut() {
        t.iter_mut().for_each(|v| *v = r.gen_range(-scale..scale));
    }
    m
}

fn mini_model(seed: u64) -> TextMapModel {
    let m = TextMapModel::init(mini_config(), 3, &mut rng(seed)).unwrap();
    // biases kept positive so few rectifiers sit at their kink
    let mut m = scrambled(&m, seed + 1, 0.7);
    for b in [&mut m.spatial.c1.b, &mut m.spatial.c2.b, &mut m.semantic.c1.b, &mut m.semantic.c2.b] {
        b.iter_mut().for_each(|v| *v = v.abs() + 0.1);
    }
    m
}

#[test]
fn blank_and_gray_pixels() {
    let blank = GrayImage::filled(8, 6, 255);
    let c = Canvas::of_raster(8.0, &blank);
    assert!(spatial_stream(&blank, &c).data.iter().all(|&v| v == 0.0));
    let gray = GrayImage::filled(4, 4, 128);
    let m = spatial_stream(&gray, &Canvas::of_raster(4.0, &gray));
    assert!((m.get(2, 3) - (1.0 - 128.0 / 255.0)).abs() < 1e-12);
    assert!((m.get(2, 3) - 0.498).abs() < 1e-3);
}

#[test]
fn ink_fraction_matches_token_area() {
    let docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), 5, 3).unwrap();
    for d in &docs {
        let img = rasterize_page(d, 72).unwrap();
        let m = spatial_stream(&img, &Canvas::of_raster(d.page.width, &img));
        assert_eq!((m.h, m.w), (img.height, img.width));
        let ink = m.data.iter().filter(|&&v| v > 0.0).count() as f64 / m.data.len() as f64;
        let area: f64 = d.tokens.iter().map(|t| t.bbox.area()).sum::<f64>() / (d.page.width * d.page.height);
        assert!((ink - area).abs() <= 0.01 * area, "ink {ink} area {area}");
    }
}

#[test]
fn missing_raster_is_rejected() {
    let mut d = mini_doc();
    d.page.raster = None;
    let m = TextMapModel::init(mini_config(), 3, &mut rng(0)).unwrap();
    assert!(matches!(m.prepare(&d, &HashVectors(3)), Err(Error::InvalidArgument(_))));
}

#[test]
fn regions_per_token_and_block() {
    let d = mini_doc();
    let t = identify_regions(&d, Mode::PerToken);
    assert_eq!(t.len(), 3);
    assert_eq!(t[1].bbox, d.tokens[1].bbox);
    assert_eq!(t[1].key, RegionKey::Token(1));
    let b = identify_regions(&d, Mode::PerBlock);
    assert_eq!(b.len(), 2);
    assert_eq!(b[0].bbox, d.tokens[0].bbox.union(&d.tokens[1].bbox));
    assert_eq!(b[0].tokens, vec![0, 1]);
    let one = Document::new("one", 10.0, 10.0, vec![token("x", 1.0, 1.0, 2.0, 2.0, 0, 0)]);
    let r = identify_regions(&one, Mode::PerToken);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].bbox, one.tokens[0].bbox);
}

/// Brute-force painting rule: last region containing the pixel, else zero.
fn check_painting(tm: &TextMap, regions: &[Region], emb: &[Vec<f64>], canvas: &Canvas) {
    let d = tm.grid.c;
    for row in 0..canvas.h {
        for col in 0..canvas.w {
            let mut want = vec![0.0; d];
            for (k, r) in regions.iter().enumerate() {
                let (r0, r1, c0, c1) = canvas.rect(&r.bbox);
                if (r0..r1).contains(&row) && (c0..c1).contains(&col) {
                    want = emb[k].clone();
                }
            }
            assert_eq!(tm.pixel(row, col), &want[..], "pixel ({row}, {col})");
        }
    }
}

#[test]
fn painting_rule_holds() {
    let d = mini_doc();
    let p = HashVectors(3);
    let canvas = Canvas::for_page(16.0, 16.0, 16).unwrap();
    let regions = identify_regions(&d, Mode::PerToken);
    let tm = build_text_map(&d, &regions, &p, &canvas).unwrap();
    assert_eq!(tm.pixel(2, 2), &p.embed_token("Alpha").unwrap()[..]);
    assert_eq!(tm.pixel(15, 15), &[0.0, 0.0, 0.0]);
    let emb = region_embeddings(&d, &regions, &p).unwrap();
    check_painting(&tm, &regions, &emb, &canvas);
}

#[test]
fn overlapping_blocks_take_the_later_embedding() {
    let mut d = Document::new(
        "ov",
        20.0,
        20.0,
        vec![token("a", 2.0, 2.0, 10.0, 10.0, 0, 0), token("b", 6.0, 6.0, 10.0, 10.0, 1, 1)],
    );
    d.page.raster = None;
    let mut pre = PrecomputedBlocks::new(2);
    pre.insert("ov", 0, vec![1.0, 2.0]).unwrap();
    pre.insert("ov", 1, vec![-3.0, 0.5]).unwrap();
    let canvas = Canvas::for_page(20.0, 20.0, 20).unwrap();
    let regions = identify_regions(&d, Mode::PerBlock);
    let tm = build_text_map(&d, &regions, &pre, &canvas).unwrap();
    assert_eq!(tm.pixel(8, 8), &[-3.0, 0.5]);
    assert_eq!(tm.pixel(3, 3), &[1.0, 2.0]);
    check_painting(&tm, &regions, &[vec![1.0, 2.0], vec![-3.0, 0.5]], &canvas);
    let mut missing = PrecomputedBlocks::new(2);
    missing.insert("ov", 0, vec![1.0, 2.0]).unwrap();
    assert!(matches!(build_text_map(&d, &regions, &missing, &canvas), Err(Error::MissingEmbedding(_))));
    assert!(build_text_map(&d, &identify_regions(&d, Mode::PerToken), &pre, &canvas).is_err());
}

#[test]
fn painting_on_synthesized_pages() {
    let docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), 3, 8).unwrap();
    let p = HashVectors(4);
    for d in &docs {
        let canvas = Canvas::for_page(d.page.width, d.page.height, 64).unwrap();
        for mode in [Mode::PerToken, Mode::PerBlock] {
            let regions = identify_regions(d, mode);
            let tm = build_text_map(d, &regions, &p, &canvas).unwrap();
            check_painting(&tm, &regions, &region_embeddings(d, &regions, &p).unwrap(), &canvas);
        }
    }
}

#[test]
fn conv_output_shapes() {
    let mut r = rng(1);
    let s = Stream::init(3, 5, &mut r);
    for (h, w) in [(1, 1), (7, 9), (16, 16), (83, 64), (5, 2)] {
        let out = s.forward(&Grid::zeros(h, w, 3));
        assert_eq!((out.h, out.w, out.c), (h.div_ceil(4), w.div_ceil(4), 5));
    }
}

#[test]
fn constant_input_gives_uniform_output() {
    let c = Conv::init(2, 3, &mut rng(2));
    let mut c = c;
    c.b = vec![0.2, -0.1, 0.05];
    let out = c.forward(&Grid::zeros(9, 7, 2));
    for k in 0..out.cells() {
        assert_eq!(out.cell(k), &[0.2, 0.0, 0.05]);
    }
    let mut s = Stream::init(2, 3, &mut rng(3));
    s.c1.b = vec![0.3, 0.1, 0.2];
    s.c2.b = vec![0.1, 0.2, -0.3];
    let out = s.forward(&Grid::zeros(32, 32, 2));
    // cells away from the zero padding all see the same constant field
    let inner = out.at(2, 2).to_vec();
    for i in 1..out.h - 1 {
        for j in 1..out.w - 1 {
            assert_eq!(out.at(i, j), &inner[..]);
        }
    }
}

#[test]
fn impulse_stays_in_receptive_field() {
    let mut s = Stream::init(1, 2, &mut rng(4));
    for t in s.tensors_mut() {
        t.iter_mut().for_each(|v| *v = v.abs() + 0.01);
    }
    s.c1.b = vec![0.0; 2];
    s.c2.b = vec![0.0; 2];
    let (h, w) = (24, 20);
    for (py, px) in [(0, 0), (11, 7), (23, 19), (5, 13)] {
        let mut g = Grid::zeros(h, w, 1);
        g.at_mut(py, px)[0] = 1.0;
        let out = s.forward(&g);
        for i in 0..out.h {
            for j in 0..out.w {
                let inside = (4 * i as isize - py as isize).abs() <= 3 && (4 * j as isize - px as isize).abs() <= 3;
                let live = out.at(i, j).iter().any(|&v| v != 0.0);
                assert_eq!(live, inside, "impulse ({py},{px}) cell ({i},{j})");
            }
        }
    }
}

fn random_grid(h: usize, w: usize, c: usize, seed: u64) -> Grid {
    let mut r = rng(seed);
    Grid {
        h,
        w,
        c,
        data: (0..h * w * c).map(|_| r.gen_range(-1.0..1.0)).collect(),
    }
}

#[test]
fn attention_rows_are_distributions() {
    let f = Fusion::init(4, 2, &mut rng(5));
    let a = f.weights(&random_grid(3, 4, 4, 1), &random_grid(3, 4, 4, 2));
    assert_eq!(a.len(), 2);
    for head in &a {
        assert_eq!(head.len(), 12);
        for (keys, w) in head {
            assert_eq!(keys.len(), 12);
            assert!(w.iter().all(|&p| p >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn identical_keys_attend_uniformly() {
    let f = Fusion::init(4, 2, &mut rng(6));
    let mut ft = Grid::zeros(3, 3, 4);
    for k in 0..9 {
        ft.data[k * 4..(k + 1) * 4].copy_from_slice(&[0.3, -0.2, 0.5, 0.1]);
    }
    for head in f.weights(&random_grid(3, 3, 4, 3), &ft) {
        for (_, w) in head {
            assert!(w.iter().all(|&p| (p - 1.0 / 9.0).abs() < 1e-12));
        }
    }
}

#[test]
fn two_by_two_hand_computation() {
    let eye = |c: usize| {
        let mut m = Mat::zeros(c, c);
        (0..c).for_each(|i| m.data[i * c + i] = 1.0);
        m
    };
    let f = Fusion {
        heads: 1,
        wq: eye(2),
        wk: eye(2),
        wv: eye(2),
        v: Mat {
            rows: 2,
            cols: 2,
            data: vec![2.0, 0.0, 1.0, -1.0],
        },
    };
    let fs = Grid {
        h: 2,
        w: 2,
        c: 2,
        data: vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0],
    };
    let ft = Grid {
        h: 2,
        w: 2,
        c: 2,
        data: vec![1.0, 2.0, 0.0, -1.0, 3.0, 0.0, 0.5, 0.5],
    };
    let m = f.forward(&fs, &ft);
    let keys = [[1.0, 2.0], [0.0, -1.0], [3.0, 0.0], [0.5, 0.5]];
    for q in 0..4 {
        let qv = [fs.data[2 * q], fs.data[2 * q + 1]];
        let logits: Vec<f64> = keys.iter().map(|k| (qv[0] * k[0] + qv[1] * k[1]) / 2f64.sqrt()).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let mut o = [0.0; 2];
        for (k, l) in keys.iter().zip(&logits) {
            o[0] += l.exp() / z * k[0];
            o[1] += l.exp() / z * k[1];
        }
        let want = [2.0 * o[0], o[0] - o[1]];
        for c in 0..2 {
            assert!((m.cell(q)[c] - want[c]).abs() < 1e-9);
        }
    }
}

#[test]
fn constant_logit_shift_leaves_output_unchanged() {
    // shifting every semantic cell along a direction the value projection ignores
    // adds the same constant to all logits of a query
    let mut f = Fusion::init(2, 1, &mut rng(7));
    f.wv = Mat {
        rows: 2,
        cols: 2,
        data: vec![1.0, 0.0, 0.5, 0.0],
    };
    let fs = random_grid(2, 3, 2, 8);
    let ft = random_grid(2, 3, 2, 9);
    let mut shifted = ft.clone();
    for k in 0..6 {
        shifted.data[2 * k + 1] += 1.7;
    }
    let (a, b) = (f.forward(&fs, &ft), f.forward(&fs, &shifted));
    for (x, y) in a.data.iter().zip(&b.data) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn large_grids_use_a_window() {
    assert_eq!(visible(10, 12, 5).len(), 120);
    assert_eq!(visible(80, 80, 40 * 80 + 40).len(), 81);
    assert_eq!(visible(80, 80, 0).len(), 25);
}

#[test]
fn fusion_shape_contract() {
    let mut r = rng(9);
    let (sp, se) = (Stream::init(1, 4, &mut r), Stream::init(3, 4, &mut r));
    for (h, w) in [(16, 16), (83, 64), (9, 5)] {
        let a = sp.forward(&random_grid(h, w, 1, 1));
        let b = se.forward(&random_grid(h, w, 3, 2));
        assert!(a.same_shape(&b));
    }
}

fn detection(label: usize, score: f64, b: BBox) -> Detection {
    Detection {
        probs: vec![],
        deltas: [0.0; 4],
        refined: b,
        label,
        score,
    }
}

#[test]
fn suppression_keeps_the_best_overlap() {
    let a = BBox::new(0.0, 0.0, 10.0, 10.0);
    let b = BBox::new(0.0, 0.0, 10.0, 6.0);
    assert!((a.iou(&b) - 0.6).abs() < 1e-12);
    assert_eq!(nms(&[detection(1, 0.7, a), detection(1, 0.9, b)], 0.5), vec![1]);
    assert_eq!(nms(&[detection(1, 0.7, a), detection(2, 0.9, b)], 0.5), vec![0, 1]);
    let far = BBox::new(20.0, 20.0, 30.0, 30.0);
    assert_eq!(nms(&[detection(1, 0.7, a), detection(1, 0.9, far)], 0.5), vec![0, 1]);
}

#[test]
fn zero_deltas_are_identity() {
    let b = BBox::new(1.25, 2.5, 7.0, 9.75);
    assert_eq!(apply_deltas(&b, &[0.0; 4]), b);
    let t = BBox::new(0.0, 2.0, 10.0, 12.0);
    let back = apply_deltas(&b, &box_deltas(&b, &t));
    for (x, y) in [(back.x0, t.x0), (back.y0, t.y0), (back.x1, t.x1), (back.y1, t.y1)] {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn single_region_detection() {
    let mut d = mini_doc();
    d.tokens.truncate(1);
    d.annotations.truncate(1);
    let m = mini_model(1);
    let s = m.prepare(&d, &HashVectors(3)).unwrap();
    let dets = m.detect(&s);
    assert_eq!(dets.len(), 1);
    assert!((dets[0].probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn semantic_and_cross_losses_match_hand_sums() {
    let m = mini_model(2);
    let s = m.prepare(&mini_doc(), &HashVectors(3)).unwrap();
    let parts = m.objective(&s);
    let dets = m.detect(&s);
    let mut sem = 0.0;
    let mut cross = 0.0;
    for i in 0..3 {
        let mut l = m.sem_b.clone();
        m.sem_w.mul_add(&s.features[i], &mut l);
        sem -= log_softmax(&l)[s.labels[i]];
        cross -= dets[i].probs[s.labels[i]].ln();
    }
    assert!((parts.semantic - sem / 3.0).abs() < 1e-9);
    assert!((parts.cross - cross / 3.0).abs() < 1e-9);
    assert!(parts.semantic >= 0.0 && parts.cross >= 0.0 && parts.spatial >= 0.0);
}

#[test]
fn uniform_predictions_cost_log_ten() {
    let mut m = mini_model(3);
    m.sem_w = Mat::zeros(m.sem_w.rows, m.sem_w.cols);
    m.sem_b = vec![0.0; 10];
    m.cls_w = Mat::zeros(m.cls_w.rows, m.cls_w.cols);
    m.cls_b = vec![0.0; 10];
    let p = m.objective(&m.prepare(&mini_doc(), &HashVectors(3)).unwrap());
    assert!((p.semantic - 10f64.ln()).abs() < 1e-12);
    assert!((p.cross - 10f64.ln()).abs() < 1e-12);
}

#[test]
fn spatial_loss_hand_case() {
    let m = mini_model(4);
    let mut s = m.prepare(&mini_doc(), &HashVectors(3)).unwrap();
    let f = m.region_spatial_features(&s);
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    // no shared labels: the indicator kills every pair
    assert_eq!(m.objective(&s).spatial, 0.0);
    s.labels = vec![3, 3, 5];
    let want: f64 = (0..3)
        .map(|i| s.neighbors[i].iter().filter(|&&j| s.labels[j] == s.labels[i]).map(|&j| sq(&f[i], &f[j])).sum::<f64>())
        .sum::<f64>()
        / 3.0;
    assert!(want > 0.0);
    assert!((m.objective(&s).spatial - want).abs() < 1e-9);
    // a constant spatial stream makes every region look alike
    let mut flat = m.clone();
    for t in flat.spatial.tensors_mut() {
        t.iter_mut().for_each(|v| *v = 0.0);
    }
    flat.spatial.c2.b = vec![0.4; 4];
    assert!(flat.objective(&s).spatial < 1e-24);
}

#[test]
fn objective_vanishes_when_every_term_does() {
    let mut m = mini_model(5);
    let mut s = m.prepare(&mini_doc(), &HashVectors(3)).unwrap();
    s.labels = vec![2, 2, 2];
    s.box_targets = vec![[0.0; 4]; 3];
    m.s = vec![0.0; 3];
    for t in m.spatial.tensors_mut() {
        t.iter_mut().for_each(|v| *v = 0.0);
    }
    m.sem_b[2] = 1000.0;
    m.cls_w = Mat::zeros(10, m.cls_w.cols);
    m.cls_b[2] = 1000.0;
    m.box_w = Mat::zeros(4, m.box_w.cols);
    m.box_b = vec![0.0; 4];
    for v in m.sem_w.data.iter_mut() {
        *v *= 0.01;
    }
    let p = m.objective(&s);
    assert_eq!((p.semantic, p.spatial, p.cross, p.boxes), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(p.total, 0.0);
}

#[test]
fn weight_gradient_matches_formula() {
    let mut m = mini_model(6);
    m.s = vec![0.3, -0.4, 0.8];
    let s = m.prepare(&mini_doc(), &HashVectors(3)).unwrap();
    let (p, g) = m.objective_and_grad(&s).unwrap();
    let l = [p.semantic, p.spatial, p.cross];
    for k in 0..3 {
        assert!((g.s[k] - (1.0 - (-m.s[k]).exp() * l[k])).abs() < 1e-12);
        let h = 1e-6;
        let mut a = m.clone();
        let mut b = m.clone();
        a.s[k] += h;
        b.s[k] -= h;
        let fd = (a.objective(&s).total - b.objective(&s).total) / (2.0 * h);
        assert!((fd - g.s[k]).abs() < 1e-6 * (1.0 + fd.abs()));
    }
}

#[test]
fn full_gradient_matches_differences() {
    for seed in [10, 11] {
        let mut m = mini_model(seed);
        m.s = vec![0.2, -0.3, 0.1];
        let mut s = m.prepare(&mini_doc(), &HashVectors(3)).unwrap();
        s.labels = vec![1, 1, 4];
        s.box_targets[0] = [0.1, -0.2, 0.3, 0.05];
        let (_, g) = m.objective_and_grad(&s).unwrap();
        let err = max_rel_error(
            |v| {
                let mut q = m.clone();
                q.set_flat_params(v);
                q.objective(&s).total
            },
            &m.flat_params(),
            &g.flat_params(),
            1e-5,
        );
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn non_finite_loss_names_the_term() {
    let m = mini_model(7);
    let mut s = m.prepare(&mini_doc(), &HashVectors(3)).unwrap();
    s.box_targets[0] = [f64::NAN, 0.0, 0.0, 0.0];
    match m.objective_and_grad(&s) {
        Err(Error::TrainingFailure(msg)) => assert!(msg.contains("box")),
        other => panic!("expected a training failure, got {:?}", other.map(|p| p.0)),
    }
}

#[test]
fn sgd_step_is_minus_lr_times_gradient() {
    let m = mini_model(8);
    let mut g = scrambled(&m, 99, 1.0);
    g.s = vec![0.0; 3];
    let mut stepped = m.clone();
    sgd_step(&mut stepped, &g, 0.125);
    for ((a, b), c) in stepped.flat_params().iter().zip(m.flat_params()).zip(g.flat_params()) {
        assert_eq!(*a, b - 0.125 * c);
    }
}

#[test]
fn extraction_inherits_region_labels() {
    let mut m = mini_model(9);
    m.cls_w = Mat::zeros(10, m.cls_w.cols);
    m.cls_b = vec![0.0; 10];
    m.cls_b[Label::Title.index()] = 50.0;
    let labels = m.extract(&mini_doc(), &HashVectors(3)).unwrap();
    assert_eq!(labels, vec![Label::Title; 3]);
    let empty = Document::new("e", 16.0, 16.0, vec![]);
    assert!(m.extract(&empty, &HashVectors(3)).unwrap().is_empty());
    let mut cfg = mini_config();
    cfg.mode = Mode::PerBlock;
    let mut mb = TextMapModel::init(cfg, 3, &mut rng(1)).unwrap();
    mb.cls_w = Mat::zeros(10, mb.cls_w.cols);
    mb.cls_b[Label::Abstract.index()] = 50.0;
    assert_eq!(mb.extract(&mini_doc(), &HashVectors(3)).unwrap(), vec![Label::Abstract; 3]);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let m = mini_model(1);
    assert!(m.prepare(&mini_doc(), &HashVectors(4)).is_err());
    let bad = TextMapConfig {
        channels: 6,
        heads: 4,
        ..mini_config()
    };
    assert!(TextMapModel::init(bad, 3, &mut rng(0)).is_err());
}

fn rastered(n: usize, seed: u64) -> Vec<Document> {
    let mut docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), n, seed).unwrap();
    for d in &mut docs {
        d.page.raster = Some(rasterize_page(d, 8).unwrap());
    }
    docs
}

#[test]
fn training_is_deterministic_and_descends() {
    let docs = rastered(10, 4);
    let cfg = TextMapConfig {
        width: 32,
        channels: 4,
        heads: 2,
        hidden: 8,
        ..Default::default()
    };
    let tcfg = TextMapTrainConfig {
        epochs: 6,
        batch: 2,
        lr: 0.1,
        ..Default::default()
    };
    let p = HashVectors(6);
    let (a, ra) = train_textmap(&docs, &p, &cfg, &tcfg).unwrap();
    let (b, rb) = train_textmap(&docs, &p, &cfg, &tcfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert!(ra.epoch_objective.last().unwrap() < ra.epoch_objective.first().unwrap(), "{:?}", ra.epoch_objective);
    assert!(a.s.iter().all(|v| v.abs() <= S_BOUND));
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = mini_model(3);
    let path = dir.path().join("tm.json");
    m.save(&path).unwrap();
    let back = TextMapModel::load(&path).unwrap();
    assert_eq!(back.config, m.config);
    for (a, b) in back.flat_params().iter().zip(m.flat_params()) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
    }
    back.save(&path).unwrap();
    assert_eq!(TextMapModel::load(&path).unwrap(), back);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(manifest["format"], FORMAT);
    assert_eq!(manifest["n_h"], 2);
}

proptest! {
    #[test]
    fn deltas_round_trip(x in 0.0f64..50.0, y in 0.0f64..50.0, w in 0.5f64..20.0, h in 0.5f64..20.0,
                         dx in -0.5f64..0.5, dy in -0.5f64..0.5, dw in -1.0f64..1.0, dh in -1.0f64..1.0) {
        let b = BBox::from_xywh(x, y, w, h);
        let t = apply_deltas(&b, &[dx, dy, dw, dh]);
        let d = box_deltas(&b, &t);
        for (a, e) in d.iter().zip([dx, dy, dw, dh]) {
            prop_assert!((a - e).abs() < 1e-9);
        }
    }
}
