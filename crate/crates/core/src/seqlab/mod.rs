//! BiLSTM token classifier and BiLSTM-CRF labeler with hand-written backpropagation.

mod heads;
mod io;
mod lstm;
mod train;


use std::path::Path;

use serde::{Deserialize, Serialize};

pub use heads::{BiLstmClassifier, BiLstmCrf, SequenceModel};
pub use io::FORMAT;
pub use lstm::{lstm_step, BiLayer, BiLstm, LstmParams};
pub use train::{batch_gradient, train_sequence_model, LabeledSequence, SeqTrainConfig, SeqTrainReport};

use crate::embeddings::{EmbeddingProvider, Mode};
use crate::error::Result;
use crate::model::{Document, Label};
use crate::util::rng;

/// Encoder shape; `head` is the width of the classifier's hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: usize,
    pub layers: usize,
    pub head: usize,
}

impl Architecture {
    /// Three layers of 112 units.
    pub fn bilstm_full() -> Self {
        Architecture {
            hidden: 112,
            layers: 3,
            head: 112,
        }
    }

    /// Four layers of 115 units.
    pub fn bilstm_crf_full() -> Self {
        Architecture {
            hidden: 115,
            layers: 4,
            head: 115,
        }
    }

    /// Small enough to train on one core in minutes.
    pub fn desk() -> Self {
        Architecture {
            hidden: 32,
            layers: 1,
            head: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaggerNet {
    BiLstm(BiLstmClassifier),
    BiLstmCrf(BiLstmCrf),
}

/// A trained sequence labeler over the ten token labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Tagger {
    pub net: TaggerNet,
    /// Whether inputs carry the orthographic shape vector after the embedding.
    pub shape: bool,
}

impl Tagger {
    pub fn kind(&self) -> &'static str {
        match self.net {
            TaggerNet::BiLstm(_) => "bilstm",
            TaggerNet::BiLstmCrf(_) => "bilstm-crf",
        }
    }

    pub fn architecture(&self) -> Architecture {
        match &self.net {
            TaggerNet::BiLstm(m) => Architecture {
                hidden: m.encoder.hidden(),
                layers: m.encoder.layers.len(),
                head: m.b1.len(),
            },
            TaggerNet::BiLstmCrf(m) => Architecture {
                hidden: m.encoder.hidden(),
                layers: m.encoder.layers.len(),
                head: 0,
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.net {
            TaggerNet::BiLstm(m) => m.input_dim(),
            TaggerNet::BiLstmCrf(m) => m.input_dim(),
        }
    }

    pub fn num_labels(&self) -> usize {
        match &self.net {
            TaggerNet::BiLstm(m) => m.num_labels(),
            TaggerNet::BiLstmCrf(m) => m.num_labels(),
        }
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Vec<usize> {
        if xs.is_empty() {
            return Vec::new();
        }
        match &self.net {
            TaggerNet::BiLstm(m) => m.predict(xs),
            TaggerNet::BiLstmCrf(m) => m.predict(xs),
        }
    }

    /// Labels every token of `doc`, embedding its text with `provider`.
    pub fn label_document(&self, doc: &Document, provider: &dyn EmbeddingProvider) -> Result<Vec<Label>> {
        let xs = tagger_inputs(doc, provider, self.shape)?;
        Ok(self
            .predict(&xs)
            .into_iter()
            .map(|i| Label::from_index(i).unwrap_or(Label::Other))
            .collect())
    }

    /// JSON manifest at `path`, f32 tensors beside it with a `.bin` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        io::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::load(path)
    }
}

/// One input vector per token: its own embedding, or its block's for per-block providers.
pub fn embed_document(doc: &Document, provider: &dyn EmbeddingProvider) -> Result<Vec<Vec<f64>>> {
    match provider.mode() {
        Mode::PerToken => doc.tokens.iter().map(|t| provider.embed_token(&t.text)).collect(),
        Mode::PerBlock => {
            let mut out = vec![Vec::new(); doc.tokens.len()];
            for b in doc.blocks() {
                let words: Vec<&str> = b.token_indices.iter().map(|&i| doc.tokens[i].text.as_str()).collect();
                let v = provider.embed_block(&doc.id, b.id, &words)?;
                for &i in &b.token_indices {
                    out[i] = v.clone();
                }
            }
            Ok(out)
        }
    }
}

/// Width of [`token_shape`].
pub const SHAPE_DIM: usize = 10;

/// Orthographic indicators of a token's surface form.
pub fn token_shape(text: &str) -> [f64; SHAPE_DIM] {
    let chars: Vec<char> = text.chars().collect();
    let letters = chars.iter().filter(|c| c.is_alphabetic()).count();
    let digits = chars.iter().filter(|c| c.is_ascii_digit()).count();
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    let year = chars.len() == 4 && digits == 4 && (text.starts_with("19") || text.starts_with("20"));
    [
        b(chars.first().is_some_and(|c| c.is_uppercase())),
        b(letters > 1 && chars.iter().filter(|c| c.is_alphabetic()).all(|c| c.is_uppercase())),
        b(digits > 0),
        b(!chars.is_empty() && digits == chars.len()),
        b(text.contains('@')),
        b(text.contains('.')),
        b(text.contains('/') || text.contains('-')),
        b(year),
        b(text.ends_with(',') || text.ends_with(';') || text.ends_with(':')),
        (chars.len() as f64 / 10.0).min(1.0),
    ]
}

/// Embeddings, followed by the shape vector when `shape` is set.
pub fn tagger_inputs(doc: &Document, provider: &dyn EmbeddingProvider, shape: bool) -> Result<Vec<Vec<f64>>> {
    let mut xs = embed_document(doc, provider)?;
    if shape {
        for (x, t) in xs.iter_mut().zip(&doc.tokens) {
            x.extend(token_shape(&t.text));
        }
    }
    Ok(xs)
}

/// Embedded documents paired with their gold labels.
pub fn labeled_sequences(docs: &[Document], provider: &dyn EmbeddingProvider, shape: bool) -> Result<Vec<LabeledSequence>> {
    docs.iter()
        .map(|d| {
            Ok(LabeledSequence {
                inputs: tagger_inputs(d, provider, shape)?,
                labels: d.token_labels().iter().map(|l| l.index()).collect(),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaggerKind {
    Bilstm,
    BilstmCrf,
}

/// Initializes a tagger of the given kind and trains it on `docs`.
pub fn train_tagger(
    kind: TaggerKind,
    docs: &[Document],
    provider: &dyn EmbeddingProvider,
    arch: &Architecture,
    shape: bool,
    cfg: &SeqTrainConfig,
) -> Result<(Tagger, SeqTrainReport)> {
    let data = labeled_sequences(docs, provider, shape)?;
    let mut r = rng(crate::util::derive_seed(cfg.seed, 1));
    let d = provider.dim() + if shape { SHAPE_DIM } else { 0 };
    let (net, rep) = match kind {
        TaggerKind::Bilstm => {
            let m = BiLstmClassifier::init(d, arch.hidden, arch.layers, arch.head, Label::COUNT, &mut r);
            let (m, rep) = train_sequence_model(m, &data, cfg)?;
            (TaggerNet::BiLstm(m), rep)
        }
        TaggerKind::BilstmCrf => {
            let m = BiLstmCrf::init(d, arch.hidden, arch.layers, Label::COUNT, &mut r);
            let (m, rep) = train_sequence_model(m, &data, cfg)?;
            (TaggerNet::BiLstmCrf(m), rep)
        }
    };
    Ok((Tagger { net, shape }, rep))
}
