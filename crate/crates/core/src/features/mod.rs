//! Handcrafted line and word features and the index that numbers them.

mod extract;
mod index;

pub use extract::{
    alignment, document_line_features, document_word_features, is_doi, is_email, is_year, length_bucket,
    line_features, word_features, Capitalization, LineAlignment, PageContext, CENTER_TOLERANCE,
};
pub use index::{bin, FeatureIndex, FeatureVector, Range, Raw, OOV};
