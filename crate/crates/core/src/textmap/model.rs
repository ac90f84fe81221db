use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{Fusion, FusionCache};
use super::conv::{out_size, Grid, Stream, StreamCache};
use super::maps::{document_spatial_map, identify_regions, paint, paint_owners, region_embeddings, Canvas, Region};
use crate::embeddings::{EmbeddingProvider, Mode};
use crate::error::{Error, Result};
use crate::model::{BBox, Document, Label};
use crate::nn::{argmax, log_softmax, softmax, Mat};
use crate::seqlab::{token_shape, SHAPE_DIM};

/// Loss weights `s_k` are kept inside `±S_BOUND`.
pub const S_BOUND: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextMapConfig {
    /// Working raster width in pixels.
    pub width: usize,
    pub channels: usize,
    pub heads: usize,
    /// Width of the detection head's hidden layer.
    pub hidden: usize,
    /// Neighbours per region in the spatial loss.
    pub neighbors: usize,
    pub mode: Mode,
    /// Append orthographic shape indicators to the region features of both classifiers.
    pub shape: bool,
    /// Give the detection head the region's page-normalized box.
    pub geometry: bool,
    pub nms_iou: f64,
}

impl Default for TextMapConfig {
    fn default() -> Self {
        TextMapConfig {
            width: 64,
            channels: 16,
            heads: 4,
            hidden: 32,
            neighbors: 4,
            mode: Mode::PerToken,
            shape: true,
            geometry: true,
            nms_iou: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextMapModel {
    pub config: TextMapConfig,
    /// Embedding dimension painted into the text map.
    pub d: usize,
    pub spatial: Stream,
    pub semantic: Stream,
    pub fusion: Fusion,
    pub det_w: Mat,
    pub det_b: Vec<f64>,
    pub cls_w: Mat,
    pub cls_b: Vec<f64>,
    pub box_w: Mat,
    pub box_b: Vec<f64>,
    /// Text-only classifier behind the semantic loss.
    pub sem_w: Mat,
    pub sem_b: Vec<f64>,
    /// Log-variance weights of the semantic, spatial and cross-modal losses.
    pub s: Vec<f64>,
}

/// A document reduced to what the model consumes.
#[derive(Clone, Debug)]
pub struct Sample {
    pub canvas: Canvas,
    pub spatial: Grid,
    pub owners: Vec<Option<usize>>,
    pub regions: Vec<Region>,
    pub embeddings: Vec<Vec<f64>>,
    /// Embedding plus optional shape indicators.
    pub features: Vec<Vec<f64>>,
    /// Page-normalized `[x0, y0, x1, y1]`, empty unless `geometry` is set.
    pub geometry: Vec<Vec<f64>>,
    /// Output-grid cells under each region.
    pub footprints: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
    pub box_targets: Vec<[f64; 4]>,
    pub neighbors: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub probs: Vec<f64>,
    pub deltas: [f64; 4],
    pub refined: BBox,
    pub label: usize,
    pub score: f64,
}

/// Individual objective terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub semantic: f64,
    pub spatial: f64,
    pub cross: f64,
    pub boxes: f64,
    pub total: f64,
}

/// `(dx, dy, dw, dh)` taking `from` onto `to`, relative to `from`.
pub fn box_deltas(from: &BBox, to: &BBox) -> [f64; 4] {
    let (fx, fy) = from.center();
    let (tx, ty) = to.center();
    let (fw, fh) = (from.width().max(1e-6), from.height().max(1e-6));
    [
        (tx - fx) / fw,
        (ty - fy) / fh,
        (to.width().max(1e-6) / fw).ln(),
        (to.height().max(1e-6) / fh).ln(),
    ]
}

pub fn apply_deltas(b: &BBox, d: &[f64; 4]) -> BBox {
    if d.iter().all(|&v| v == 0.0) {
        return *b;
    }
    let (cx, cy) = b.center();
    let (w, h) = (b.width(), b.height());
    let (nx, ny) = (cx + d[0] * w, cy + d[1] * h);
    let (nw, nh) = (w * d[2].exp(), h * d[3].exp());
    BBox::new(nx - nw / 2.0, ny - nh / 2.0, nx + nw / 2.0, ny + nh / 2.0)
}

/// Greedy same-label suppression; returns kept detection indices in input order.
pub fn nms(dets: &[Detection], iou: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let clash = kept
            .iter()
            .any(|&k| dets[k].label == dets[i].label && dets[k].refined.iou(&dets[i].refined) > iou);
        if !clash {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

fn smooth_l1(x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

/// Grid cell whose receptive field is centred nearest to pixel `p`.
fn cell_of(p: usize, cells: usize) -> usize {
    ((p + 2) / 4).min(cells - 1)
}

fn footprint(canvas: &Canvas, b: &BBox) -> Vec<usize> {
    let (gh, gw) = (out_size(out_size(canvas.h)), out_size(out_size(canvas.w)));
    let (r0, r1, c0, c1) = canvas.rect(b);
    let (i0, i1) = (cell_of(r0, gh), cell_of(r1 - 1, gh));
    let (j0, j1) = (cell_of(c0, gw), cell_of(c1 - 1, gw));
    (i0..=i1).flat_map(|i| (j0..=j1).map(move |j| i * gw + j)).collect()
}

/// `k` nearest region centres, ties to the lower index.
pub fn neighbor_graph(regions: &[Region], k: usize) -> Vec<Vec<usize>> {
    let centers: Vec<(f64, f64)> = regions.iter().map(|r| r.bbox.center()).collect();
    (0..regions.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..regions.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let (dx, dy) = (centers[i].0 - centers[j].0, centers[i].1 - centers[j].1);
                    (dx * dx + dy * dy, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|p| p.1).collect()
        })
        .collect()
}

fn region_label(r: &Region, gold: &[Label]) -> usize {
    let mut counts = [0usize; Label::COUNT];
    for &t in &r.tokens {
        counts[gold[t].index()] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn mean_rows(g: &Grid, cells: &[usize]) -> Vec<f64> {
    let mut v = vec![0.0; g.c];
    for &k in cells {
        v.iter_mut().zip(g.cell(k)).for_each(|(a, b)| *a += b);
    }
    let n = cells.len().max(1) as f64;
    v.iter_mut().for_each(|a| *a /= n);
    v
}

fn spread(g: &mut Grid, cells: &[usize], dv: &[f64]) {
    let n = cells.len().max(1) as f64;
    let c = g.c;
    for &k in cells {
        g.data[k * c..(k + 1) * c].iter_mut().zip(dv).for_each(|(a, b)| *a += b / n);
    }
}

struct Forward {
    fs: Grid,
    fs_cache: StreamCache,
    tm: Grid,
    ft: Grid,
    ft_cache: StreamCache,
    m: Grid,
    fusion_cache: FusionCache,
}

struct HeadOut {
    z: Vec<f64>,
    a: Vec<f64>,
    logits: Vec<f64>,
    deltas: [f64; 4],
}

impl TextMapModel {
    pub fn init<R: Rng>(config: TextMapConfig, d: usize, r: &mut R) -> Result<Self> {
        let c = config.channels;
        if d == 0 || c == 0 || config.heads == 0 || c % config.heads != 0 || config.hidden == 0 {
            return Err(Error::invalid("channels must be a positive multiple of the head count"));
        }
        let e = d + if config.shape { SHAPE_DIM } else { 0 };
        Ok(TextMapModel {
            spatial: Stream::init(1, c, r),
            semantic: Stream::init(d, c, r),
            fusion: Fusion::init(c, config.heads, r),
            det_w: Mat::uniform(config.hidden, c + e + if config.geometry { 4 } else { 0 }, r),
            det_b: vec![0.0; config.hidden],
            cls_w: Mat::uniform(Label::COUNT, config.hidden, r),
            cls_b: vec![0.0; Label::COUNT],
            box_w: Mat::zeros(4, config.hidden),
            box_b: vec![0.0; 4],
            sem_w: Mat::uniform(Label::COUNT, e, r),
            sem_b: vec![0.0; Label::COUNT],
            s: vec![0.0; 3],
            d,
            config,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Mat| Mat::zeros(m.rows, m.cols);
        TextMapModel {
            config: self.config.clone(),
            d: self.d,
            spatial: self.spatial.zeros_like(),
            semantic: self.semantic.zeros_like(),
            fusion: self.fusion.zeros_like(),
            det_w: z(&self.det_w),
            det_b: vec![0.0; self.det_b.len()],
            cls_w: z(&self.cls_w),
            cls_b: vec![0.0; self.cls_b.len()],
            box_w: z(&self.box_w),
            box_b: vec![0.0; 4],
            sem_w: z(&self.sem_w),
            sem_b: vec![0.0; self.sem_b.len()],
            s: vec![0.0; 3],
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.spatial.tensors();
        t.extend(self.semantic.tensors());
        t.extend(self.fusion.tensors());
        t.extend([
            &self.det_w.data[..],
            &self.det_b,
            &self.cls_w.data,
            &self.cls_b,
            &self.box_w.data,
            &self.box_b,
            &self.sem_w.data,
            &self.sem_b,
            &self.s,
        ]);
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.spatial.tensors_mut();
        t.extend(self.semantic.tensors_mut());
        t.extend(self.fusion.tensors_mut());
        t.extend([
            &mut self.det_w.data[..],
            &mut self.det_b,
            &mut self.cls_w.data,
            &mut self.cls_b,
            &mut self.box_w.data,
            &mut self.box_b,
            &mut self.sem_w.data,
            &mut self.sem_b,
            &mut self.s,
        ]);
        t
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut at = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[at..at + t.len()]);
            at += t.len();
        }
        assert_eq!(at, flat.len(), "parameter vector length mismatch");
    }

    /// `(α, β, γ) = exp(−s_k)`.
    pub fn loss_weights(&self) -> [f64; 3] {
        [(-self.s[0]).exp(), (-self.s[1]).exp(), (-self.s[2]).exp()]
    }

    pub fn canvas_for(&self, doc: &Document) -> Result<Canvas> {
        Canvas::for_page(doc.page.width, doc.page.height, self.config.width)
    }

    /// Builds the model inputs for `doc`; gold labels and box targets come from its annotations.
    pub fn prepare(&self, doc: &Document, provider: &dyn EmbeddingProvider) -> Result<Sample> {
        if provider.dim() != self.d {
            return Err(Error::invalid(format!(
                "embedding dimension {} does not match the model's {}",
                provider.dim(),
                self.d
            )));
        }
        let canvas = self.canvas_for(doc)?;
        let spatial = document_spatial_map(doc, &canvas)?.to_grid();
        let regions = identify_regions(doc, self.config.mode);
        let embeddings = region_embeddings(doc, &regions, provider)?;
        let features = regions
            .iter()
            .zip(&embeddings)
            .map(|(r, e)| {
                let mut f = e.clone();
                if self.config.shape {
                    let mut s = [0.0; SHAPE_DIM];
                    for &t in &r.tokens {
                        s.iter_mut().zip(token_shape(&doc.tokens[t].text)).for_each(|(a, b)| *a += b);
                    }
                    let n = r.tokens.len().max(1) as f64;
                    f.extend(s.iter().map(|v| v / n));
                }
                f
            })
            .collect();
        let gold = doc.token_labels();
        let labels: Vec<usize> = regions.iter().map(|r| region_label(r, &gold)).collect();
        let box_targets = regions
            .iter()
            .zip(&labels)
            .map(|(r, &y)| {
                let own = r.tokens.iter().filter(|&&t| gold[t].index() == y).map(|&t| &doc.tokens[t].bbox);
                BBox::union_all(own).map(|t| box_deltas(&r.bbox, &t)).unwrap_or([0.0; 4])
            })
            .collect();
        let geometry = regions
            .iter()
            .map(|r| match self.config.geometry {
                true => vec![
                    r.bbox.x0 / doc.page.width,
                    r.bbox.y0 / doc.page.height,
                    r.bbox.x1 / doc.page.width,
                    r.bbox.y1 / doc.page.height,
                ],
                false => Vec::new(),
            })
            .collect();
        Ok(Sample {
            geometry,
            owners: paint_owners(&regions, &canvas),
            footprints: regions.iter().map(|r| footprint(&canvas, &r.bbox)).collect(),
            neighbors: neighbor_graph(&regions, self.config.neighbors),
            canvas,
            spatial,
            regions,
            embeddings,
            features,
            labels,
            box_targets,
        })
    }

    fn forward(&self, s: &Sample) -> Forward {
        let (fs, fs_cache) = self.spatial.forward_cached(&s.spatial);
        let tm = paint(&s.owners, &s.embeddings, &s.canvas, self.d).grid;
        let (ft, ft_cache) = self.semantic.forward_cached(&tm);
        let (m, fusion_cache) = self.fusion.forward_cached(&fs, &ft);
        Forward {
            fs,
            fs_cache,
            tm,
            ft,
            ft_cache,
            m,
            fusion_cache,
        }
    }

    fn head(&self, m: &Grid, s: &Sample, i: usize) -> HeadOut {
        let mut z = mean_rows(m, &s.footprints[i]);
        z.extend_from_slice(&s.features[i]);
        z.extend_from_slice(&s.geometry[i]);
        let mut a = self.det_b.clone();
        self.det_w.mul_add(&z, &mut a);
        a.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut logits = self.cls_b.clone();
        self.cls_w.mul_add(&a, &mut logits);
        let mut d = self.box_b.clone();
        self.box_w.mul_add(&a, &mut d);
        HeadOut {
            z,
            a,
            logits,
            deltas: [d[0], d[1], d[2], d[3]],
        }
    }

    fn semantic_logits(&self, feat: &[f64]) -> Vec<f64> {
        let mut l = self.sem_b.clone();
        self.sem_w.mul_add(feat, &mut l);
        l
    }

    /// Spatial-stream features averaged over each region.
    pub fn region_spatial_features(&self, s: &Sample) -> Vec<Vec<f64>> {
        let fs = self.spatial.forward(&s.spatial);
        s.footprints.iter().map(|f| mean_rows(&fs, f)).collect()
    }

    /// Fused grid for a prepared sample.
    pub fn fused(&self, s: &Sample) -> Grid {
        self.forward(s).m
    }

    /// Class distribution, box deltas and refined box per region.
    pub fn detect(&self, s: &Sample) -> Vec<Detection> {
        if s.regions.is_empty() {
            return Vec::new();
        }
        let f = self.forward(s);
        s.regions
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let h = self.head(&f.m, s, i);
                let probs = softmax(&h.logits);
                let label = argmax(&h.logits);
                Detection {
                    score: probs[label],
                    refined: apply_deltas(&r.bbox, &h.deltas),
                    deltas: h.deltas,
                    label,
                    probs,
                }
            })
            .collect()
    }

    /// Per-token labels: detect, suppress, and let tokens inherit their region's label.
    pub fn extract(&self, doc: &Document, provider: &dyn EmbeddingProvider) -> Result<Vec<Label>> {
        if doc.tokens.is_empty() {
            return Ok(Vec::new());
        }
        let s = self.prepare(doc, provider)?;
        let dets = self.detect(&s);
        let mut out = vec![Label::Other; doc.tokens.len()];
        for k in nms(&dets, self.config.nms_iou) {
            let l = Label::from_index(dets[k].label).unwrap_or(Label::Other);
            for &t in &s.regions[k].tokens {
                out[t] = l;
            }
        }
        Ok(out)
    }

    fn parts(&self, s: &Sample, heads: &[HeadOut], fsp: &[Vec<f64>]) -> LossParts {
        let n = s.regions.len().max(1) as f64;
        let mut p = LossParts::default();
        for (i, h) in heads.iter().enumerate() {
            let y = s.labels[i];
            p.semantic -= log_softmax(&self.semantic_logits(&s.features[i]))[y];
            p.cross -= log_softmax(&h.logits)[y];
            for k in 0..4 {
                p.boxes += smooth_l1(h.deltas[k] - s.box_targets[i][k]).0;
            }
            for &j in &s.neighbors[i] {
                if s.labels[j] == y {
                    p.spatial += fsp[i].iter().zip(&fsp[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
            }
        }
        p.semantic /= n;
        p.cross /= n;
        p.boxes /= n;
        p.spatial /= n;
        let w = self.loss_weights();
        p.total = w[0] * p.semantic + w[1] * p.spatial + w[2] * p.cross + self.s.iter().sum::<f64>() + p.boxes;
        p
    }

    /// Joint objective on one sample.
    pub fn objective(&self, s: &Sample) -> LossParts {
        let f = self.forward(s);
        let heads: Vec<HeadOut> = (0..s.regions.len()).map(|i| self.head(&f.m, s, i)).collect();
        let fsp: Vec<Vec<f64>> = s.footprints.iter().map(|c| mean_rows(&f.fs, c)).collect();
        self.parts(s, &heads, &fsp)
    }

    /// Joint objective and the gradient of every parameter, `s_k` included.
    pub fn objective_and_grad(&self, s: &Sample) -> Result<(LossParts, TextMapModel)> {
        let f = self.forward(s);
        let heads: Vec<HeadOut> = (0..s.regions.len()).map(|i| self.head(&f.m, s, i)).collect();
        let fsp: Vec<Vec<f64>> = s.footprints.iter().map(|c| mean_rows(&f.fs, c)).collect();
        let parts = self.parts(s, &heads, &fsp);
        for (name, v) in [
            ("semantic", parts.semantic),
            ("spatial", parts.spatial),
            ("cross", parts.cross),
            ("box", parts.boxes),
        ] {
            if !v.is_finite() {
                return Err(Error::TrainingFailure(format!("{name} loss is not finite")));
            }
        }
        let mut g = self.zeros_like();
        let w = self.loss_weights();
        g.s[0] = 1.0 - w[0] * parts.semantic;
        g.s[1] = 1.0 - w[1] * parts.spatial;
        g.s[2] = 1.0 - w[2] * parts.cross;
        let n = s.regions.len().max(1) as f64;
        let mut dm = Grid::zeros(f.m.h, f.m.w, f.m.c);
        let mut dfs = Grid::zeros(f.fs.h, f.fs.w, f.fs.c);
        let c = self.config.channels;
        for (i, h) in heads.iter().enumerate() {
            let y = s.labels[i];
            let mut dsem = softmax(&self.semantic_logits(&s.features[i]));
            dsem[y] -= 1.0;
            dsem.iter_mut().for_each(|v| *v *= w[0] / n);
            g.sem_w.add_outer(&dsem, &s.features[i]);
            g.sem_b.iter_mut().zip(&dsem).for_each(|(a, b)| *a += b);

            let mut dl = softmax(&h.logits);
            dl[y] -= 1.0;
            dl.iter_mut().for_each(|v| *v *= w[2] / n);
            let dd: Vec<f64> = (0..4).map(|k| smooth_l1(h.deltas[k] - s.box_targets[i][k]).1 / n).collect();
            g.cls_w.add_outer(&dl, &h.a);
            g.cls_b.iter_mut().zip(&dl).for_each(|(a, b)| *a += b);
            g.box_w.add_outer(&dd, &h.a);
            g.box_b.iter_mut().zip(&dd).for_each(|(a, b)| *a += b);
            let mut da = vec![0.0; h.a.len()];
            self.cls_w.mul_t_add(&dl, &mut da);
            self.box_w.mul_t_add(&dd, &mut da);
            for (d, &a) in da.iter_mut().zip(&h.a) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            g.det_w.add_outer(&da, &h.z);
            g.det_b.iter_mut().zip(&da).for_each(|(a, b)| *a += b);
            let mut dz = vec![0.0; h.z.len()];
            self.det_w.mul_t_add(&da, &mut dz);
            spread(&mut dm, &s.footprints[i], &dz[..c]);

            for &j in &s.neighbors[i] {
                if s.labels[j] == y {
                    let diff: Vec<f64> = fsp[i].iter().zip(&fsp[j]).map(|(a, b)| 2.0 * w[1] / n * (a - b)).collect();
                    spread(&mut dfs, &s.footprints[i], &diff);
                    let neg: Vec<f64> = diff.iter().map(|v| -v).collect();
                    spread(&mut dfs, &s.footprints[j], &neg);
                }
            }
        }
        let (dfs_att, dft) = self.fusion.backward(&f.fs, &f.ft, &f.fusion_cache, &dm, &mut g.fusion);
        dfs.data.iter_mut().zip(&dfs_att.data).for_each(|(a, b)| *a += b);
        self.spatial.backward(&s.spatial, &f.fs_cache, &f.fs, &dfs, &mut g.spatial);
        self.semantic.backward(&f.tm, &f.ft_cache, &f.ft, &dft, &mut g.semantic);
        Ok((parts, g))
    }
}
