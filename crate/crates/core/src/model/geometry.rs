use serde::{Deserialize, Serialize};

/// Axis-aligned box in page points, origin top-left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        BBox::new(x, y, x + w, y + h)
    }

    pub fn to_xywh(&self) -> (f64, f64, f64, f64) {
        (self.x0, self.y0, self.width(), self.height())
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.x0.is_finite()
            && self.y0.is_finite()
            && self.x1.is_finite()
            && self.y1.is_finite()
            && self.x0 < self.x1
            && self.y0 < self.y1
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x0 >= 0.0 && self.y0 >= 0.0 && self.x1 <= width && self.y1 <= height
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox::new(
            self.x0.min(other.x0),
            self.y0.min(other.y0),
            self.x1.max(other.x1),
            self.y1.max(other.y1),
        )
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Tight union over an iterator of boxes; `None` when empty.
    pub fn union_all<'a>(boxes: impl IntoIterator<Item = &'a BBox>) -> Option<BBox> {
        boxes.into_iter().fold(None, |acc: Option<BBox>, b| {
            Some(match acc {
                Some(a) => a.union(b),
                None => *b,
            })
        })
    }
}

/// Half-open pixel span covered by `[a0, a1)` at `scale` pixels per point.
///
/// A pixel belongs to the span when its centre lies inside the interval. Spans
/// that would be empty collapse onto the single pixel containing the midpoint,
/// so every box covers at least one pixel. Result is clamped to `[0, limit)`.
pub fn pixel_span(a0: f64, a1: f64, scale: f64, limit: usize) -> (usize, usize) {
    let lim = limit as f64;
    let start = (a0 * scale - 0.5).ceil().clamp(0.0, lim);
    let end = (a1 * scale - 0.5).ceil().clamp(0.0, lim);
    if end > start {
        (start as usize, end as usize)
    } else {
        let mid = ((a0 + a1) / 2.0 * scale).floor().clamp(0.0, lim - 1.0);
        (mid as usize, mid as usize + 1)
    }
}

/// Pixel rectangle `(row0, row1, col0, col1)` of a box in a `rows`×`cols` grid.
pub fn pixel_rect(b: &BBox, scale: f64, rows: usize, cols: usize) -> (usize, usize, usize, usize) {
    let (r0, r1) = pixel_span(b.y0, b.y1, scale, rows);
    let (c0, c1) = pixel_span(b.x0, b.x1, scale, cols);
    (r0, r1, c0, c1)
}
