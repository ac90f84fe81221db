//! Metadata alignment: ground known bibliographic fields on page tokens.

mod gateway;
mod matching;
mod text;

pub use gateway::{
    fetch_metadata, is_valid_doi, parse_crossref, FixtureGateway, GatewayRecord, HttpGateway, MetadataGateway,
    TIMEOUT_ENV,
};
pub use matching::{
    align_corpus, build_record, document_doi, find_field_span, map_span_to_bbox, AlignOutcome, AlignThresholds,
    AlignmentReport, CorpusAlignment, MatchKind, MatchResult, MATCH_ORDER, WINDOW_SLACK,
};
pub use text::{levenshtein, levenshtein_similarity, normalize_text};
