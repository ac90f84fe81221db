//! Linear-chain CRF: exact inference, penalized likelihood training and the two-layer
//! section/word extractor.

mod inference;
mod model;
mod train;
mod two_layer;

pub use inference::{log_partition, marginals, sequence_log_prob, sequence_score, viterbi, Marginals, Potentials};
pub use model::{weight_count, CrfModel, FORMAT};
pub use train::{fit_weights, loglik, loglik_and_grad, train_crf, CrfTrainConfig, CrfTrainReport, Instance, Sequence};
pub use two_layer::{
    default_excluded, section_segments, train_two_layer, TwoLayerOutput, TwoLayerPipeline, TwoLayerReport,
    PIPELINE_FORMAT,
};
