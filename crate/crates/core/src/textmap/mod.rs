//! Spatial/semantic fusion model over rasterized pages and embedding-painted text maps.

mod attention;
mod conv;
mod io;
mod maps;
mod model;
mod train;

#[cfg(test)]
mod tests;

use std::path::Path;

pub use attention::{Fusion, FULL_ATTENTION_SIDE, WINDOW_RADIUS};
pub use conv::{Conv, Grid, Stream};
pub use io::FORMAT;
pub use maps::{
    build_text_map, document_spatial_map, identify_regions, paint, paint_owners, region_embeddings, spatial_stream,
    Canvas, Region, RegionKey, SpatialMap, TextMap,
};
pub use model::{
    apply_deltas, box_deltas, neighbor_graph, nms, Detection, LossParts, Sample, TextMapConfig, TextMapModel, S_BOUND,
};
pub use train::{batch_objective, fit, prepare_all, sgd_step, train_textmap, TextMapTrainConfig, TextMapTrainReport};

use crate::error::Result;

impl TextMapModel {
    /// JSON manifest at `path`, f32 tensors beside it with a `.bin` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        io::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::load(path)
    }
}
