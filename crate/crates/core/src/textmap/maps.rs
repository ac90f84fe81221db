use serde::{Deserialize, Serialize};

use super::conv::Grid;
use crate::embeddings::{EmbeddingProvider, Mode};
use crate::error::{Error, Result};
use crate::model::{pixel_rect, BBox, Document, GrayImage};

/// Pixel grid the maps are drawn on: `w` columns across the page width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Canvas {
    pub h: usize,
    pub w: usize,
    /// Pixels per point.
    pub scale: f64,
}

impl Canvas {
    pub fn for_page(page_w: f64, page_h: f64, width: usize) -> Result<Self> {
        if width == 0 || !(page_w > 0.0 && page_h > 0.0) {
            return Err(Error::invalid("canvas needs a positive width and page size"));
        }
        let scale = width as f64 / page_w;
        Ok(Canvas {
            h: ((page_h * scale).round() as usize).max(1),
            w: width,
            scale,
        })
    }

    /// Same grid as a raster.
    pub fn of_raster(page_w: f64, img: &GrayImage) -> Self {
        Canvas {
            h: img.height,
            w: img.width,
            scale: img.width as f64 / page_w,
        }
    }

    pub fn rect(&self, b: &BBox) -> (usize, usize, usize, usize) {
        pixel_rect(b, self.scale, self.h, self.w)
    }
}

/// Inverted grayscale page: ink 1, background 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialMap {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl SpatialMap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.w + col]
    }

    pub fn to_grid(&self) -> Grid {
        Grid {
            h: self.h,
            w: self.w,
            c: 1,
            data: self.data.clone(),
        }
    }
}

/// Box-filters `img` onto `canvas` and inverts it. Equal sizes copy pixel for pixel.
pub fn spatial_stream(img: &GrayImage, canvas: &Canvas) -> SpatialMap {
    let span = |i: usize, n_out: usize, n_in: usize| {
        let a = i * n_in / n_out;
        let b = ((i + 1) * n_in / n_out).max(a + 1).min(n_in);
        (a.min(n_in - 1), b)
    };
    let mut data = Vec::with_capacity(canvas.h * canvas.w);
    for i in 0..canvas.h {
        let (r0, r1) = span(i, canvas.h, img.height);
        for j in 0..canvas.w {
            let (c0, c1) = span(j, canvas.w, img.width);
            let mut s = 0.0;
            for r in r0..r1 {
                for c in c0..c1 {
                    s += img.get(r, c) as f64;
                }
            }
            let mean = s / ((r1 - r0) * (c1 - c0)) as f64;
            data.push(1.0 - mean / 255.0);
        }
    }
    SpatialMap {
        h: canvas.h,
        w: canvas.w,
        data,
    }
}

/// Spatial map of a document's attached raster.
pub fn document_spatial_map(doc: &Document, canvas: &Canvas) -> Result<SpatialMap> {
    let img = doc
        .page
        .raster
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("document {} has no raster", doc.id)))?;
    Ok(spatial_stream(img, canvas))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKey {
    Token(usize),
    Block(usize),
}

/// A text region and the tokens it covers, in reading order.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub bbox: BBox,
    pub key: RegionKey,
    pub tokens: Vec<usize>,
}

/// One region per token, or one per block with the union box.
pub fn identify_regions(doc: &Document, mode: Mode) -> Vec<Region> {
    match mode {
        Mode::PerToken => doc
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| Region {
                bbox: t.bbox,
                key: RegionKey::Token(i),
                tokens: vec![i],
            })
            .collect(),
        Mode::PerBlock => doc
            .blocks()
            .into_iter()
            .map(|b| Region {
                bbox: b.bbox,
                key: RegionKey::Block(b.id),
                tokens: b.token_indices,
            })
            .collect(),
    }
}

/// Embedding of every region under `provider`.
pub fn region_embeddings(doc: &Document, regions: &[Region], provider: &dyn EmbeddingProvider) -> Result<Vec<Vec<f64>>> {
    regions
        .iter()
        .map(|r| match r.key {
            RegionKey::Token(i) => {
                if provider.mode() == Mode::PerBlock {
                    return Err(Error::invalid("per-token regions need a per-token embedding provider"));
                }
                provider.embed_token(&doc.tokens[i].text)
            }
            RegionKey::Block(b) => {
                let words: Vec<&str> = r.tokens.iter().map(|&i| doc.tokens[i].text.as_str()).collect();
                provider.embed_block(&doc.id, b, &words)
            }
        })
        .collect()
}

/// Region painted at each pixel, later regions winning overlaps.
pub fn paint_owners(regions: &[Region], canvas: &Canvas) -> Vec<Option<usize>> {
    let mut owner = vec![None; canvas.h * canvas.w];
    for (k, r) in regions.iter().enumerate() {
        let (r0, r1, c0, c1) = canvas.rect(&r.bbox);
        for row in r0..r1 {
            for col in c0..c1 {
                owner[row * canvas.w + col] = Some(k);
            }
        }
    }
    owner
}

/// `h × w × d` map carrying each region's embedding over its pixels, zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct TextMap {
    pub grid: Grid,
}

impl TextMap {
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        self.grid.at(row, col)
    }
}

pub fn paint(owners: &[Option<usize>], embeddings: &[Vec<f64>], canvas: &Canvas, d: usize) -> TextMap {
    let mut grid = Grid::zeros(canvas.h, canvas.w, d);
    for (k, o) in owners.iter().enumerate() {
        if let Some(r) = o {
            grid.data[k * d..(k + 1) * d].copy_from_slice(&embeddings[*r]);
        }
    }
    TextMap { grid }
}

pub fn build_text_map(
    doc: &Document,
    regions: &[Region],
    provider: &dyn EmbeddingProvider,
    canvas: &Canvas,
) -> Result<TextMap> {
    let e = region_embeddings(doc, regions, provider)?;
    Ok(paint(&paint_owners(regions, canvas), &e, canvas, provider.dim()))
}
