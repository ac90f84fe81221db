//! Document, label and geometry types shared by every other module.

mod corpus;
mod document;
mod geometry;
mod grouping;
mod label;
mod raster;

pub use corpus::{load_rasters, read_corpus, read_corpus_str, write_corpus, write_corpus_string};
pub use document::{Annotation, Document, Line, MetadataRecord, Page, TextBlock, Token};
pub use geometry::{pixel_rect, pixel_span, BBox};
pub use grouping::{arrange, group_into_blocks, group_into_lines, GroupingConfig};
pub(crate) use grouping::median;
pub use label::{Label, SectionLabel};
pub use raster::GrayImage;
