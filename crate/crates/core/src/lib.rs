//! Metadata extraction workbench for the first page of scholarly documents.
//!
//! The crate bundles four extractors (a two-layer CRF, a BiLSTM tagger, a
//! BiLSTM-CRF and the TextMap spatial/semantic fusion model), two dataset
//! builders (template synthesis and metadata alignment) and a token-level
//! evaluation harness. The `metaforge` binary wires them together; the
//! `examples/` directory shows each capability in isolation.

pub mod align;
pub mod cli;
pub mod crf;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub(crate) mod nn;
pub mod pipeline;
pub mod seqlab;
pub mod synth;
pub mod textmap;
pub(crate) mod util;

pub use error::{Error, Result};
pub use model::{Annotation, BBox, Document, Label, MetadataRecord, SectionLabel, Token};
