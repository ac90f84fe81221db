//! One entry point per extraction method: train on a corpus, label documents, save and load.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crf::{default_excluded, train_two_layer, CrfTrainConfig, TwoLayerPipeline};
use crate::embeddings::{
    token_streams, train_char2vec, train_word2vec, Char2VecConfig, EmbeddingProvider, Embeddings, Mode, Word2VecConfig,
};
use crate::error::{Error, Result};
use crate::model::{Document, Label};
use crate::seqlab::{train_tagger, Architecture, SeqTrainConfig, Tagger, TaggerKind};
use crate::textmap::{train_textmap, TextMapConfig, TextMapModel, TextMapTrainConfig};
use crate::util::derive_seed;

pub const FORMAT: &str = "metaforge-extractor/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Crf,
    Bilstm,
    BilstmCrf,
    TextmapWord2vec,
    TextmapChar2vec,
    TextmapPrecomputed,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Crf,
        Method::Bilstm,
        Method::BilstmCrf,
        Method::TextmapWord2vec,
        Method::TextmapChar2vec,
        Method::TextmapPrecomputed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Crf => "crf",
            Method::Bilstm => "bilstm",
            Method::BilstmCrf => "bilstm-crf",
            Method::TextmapWord2vec => "textmap-word2vec",
            Method::TextmapChar2vec => "textmap-char2vec",
            Method::TextmapPrecomputed => "textmap-precomputed",
        }
    }

    pub fn is_textmap(self) -> bool {
        matches!(self, Method::TextmapWord2vec | Method::TextmapChar2vec | Method::TextmapPrecomputed)
    }

    /// Whether training needs an embedding file supplied by the caller.
    pub fn needs_precomputed(self) -> bool {
        self == Method::TextmapPrecomputed
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::invalid(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Hyperparameters for every method; each method reads the parts it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub seed: u64,
    pub crf: CrfTrainConfig,
    pub word2vec: Word2VecConfig,
    pub char2vec: Char2VecConfig,
    pub architecture: Architecture,
    /// Orthographic shape indicators for the BiLSTM taggers.
    pub shape: bool,
    pub seq: SeqTrainConfig,
    pub textmap: TextMapConfig,
    pub textmap_train: TextMapTrainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            seed: 0,
            crf: CrfTrainConfig::default(),
            word2vec: Word2VecConfig::default(),
            char2vec: Char2VecConfig::default(),
            architecture: Architecture::desk(),
            shape: true,
            seq: SeqTrainConfig::default(),
            textmap: TextMapConfig::default(),
            textmap_train: TextMapTrainConfig::default(),
        }
    }
}

impl TrainSettings {
    /// Copies of the component configs with seeds derived from `seed`.
    fn seeded(&self) -> TrainSettings {
        let mut s = self.clone();
        s.word2vec.seed = derive_seed(self.seed, 1);
        s.char2vec.seed = derive_seed(self.seed, 2);
        s.seq.seed = derive_seed(self.seed, 3);
        s.textmap_train.seed = derive_seed(self.seed, 4);
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Extractor {
    Crf(TwoLayerPipeline),
    Tagger {
        method: Method,
        tagger: Tagger,
        embeddings: Embeddings,
    },
    TextMap {
        method: Method,
        model: TextMapModel,
        embeddings: Embeddings,
    },
}

/// Trains `method` on `docs`. TextMap methods need rasters on every document;
/// `textmap-precomputed` also needs `precomputed` block vectors.
pub fn train(method: Method, docs: &[Document], settings: &TrainSettings, precomputed: Option<Embeddings>) -> Result<Extractor> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot train on an empty corpus"));
    }
    let s = settings.seeded();
    let word_vectors = || -> Result<Embeddings> { Ok(Embeddings::Word2Vec(train_word2vec(&token_streams(docs), &s.word2vec)?)) };
    Ok(match method {
        Method::Crf => Extractor::Crf(train_two_layer(docs, &s.crf, &default_excluded())?.0),
        Method::Bilstm | Method::BilstmCrf => {
            let embeddings = word_vectors()?;
            let kind = if method == Method::Bilstm { TaggerKind::Bilstm } else { TaggerKind::BilstmCrf };
            let (tagger, _) = train_tagger(kind, docs, &embeddings, &s.architecture, s.shape, &s.seq)?;
            Extractor::Tagger {
                method,
                tagger,
                embeddings,
            }
        }
        Method::TextmapWord2vec | Method::TextmapChar2vec | Method::TextmapPrecomputed => {
            let embeddings = match method {
                Method::TextmapWord2vec => word_vectors()?,
                Method::TextmapChar2vec => Embeddings::Char2Vec(train_char2vec(&token_streams(docs), &s.char2vec)?),
                _ => precomputed.ok_or_else(|| Error::invalid("textmap-precomputed needs an embedding file"))?,
            };
            let mut config = s.textmap.clone();
            if method == Method::TextmapPrecomputed {
                config.mode = Mode::PerBlock;
            }
            let (model, _) = train_textmap(docs, &embeddings, &config, &s.textmap_train)?;
            Extractor::TextMap {
                method,
                model,
                embeddings,
            }
        }
    })
}

#[derive(Serialize, Deserialize)]
struct BundleFile {
    format: String,
    method: Method,
    /// Component files, relative to the bundle.
    components: Vec<String>,
}

fn component_path(bundle: &Path, part: &str) -> PathBuf {
    let stem = bundle.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    bundle.with_file_name(format!("{stem}.{part}.json"))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

impl Extractor {
    pub fn method(&self) -> Method {
        match self {
            Extractor::Crf(_) => Method::Crf,
            Extractor::Tagger { method, .. } | Extractor::TextMap { method, .. } => *method,
        }
    }

    pub fn embeddings(&self) -> Option<&Embeddings> {
        match self {
            Extractor::Crf(_) => None,
            Extractor::Tagger { embeddings, .. } | Extractor::TextMap { embeddings, .. } => Some(embeddings),
        }
    }

    /// Swaps in another provider of the same dimension and mode, e.g. block vectors for new documents.
    pub fn replace_embeddings(&mut self, new: Embeddings) -> Result<()> {
        match self {
            Extractor::Crf(_) => Err(Error::invalid("the CRF does not use embeddings")),
            Extractor::Tagger { embeddings, .. } | Extractor::TextMap { embeddings, .. } => {
                if new.dim() != embeddings.dim() || new.mode() != embeddings.mode() {
                    return Err(Error::invalid(format!(
                        "replacement embeddings have dimension {} ({:?}), model expects {} ({:?})",
                        new.dim(),
                        new.mode(),
                        embeddings.dim(),
                        embeddings.mode()
                    )));
                }
                *embeddings = new;
                Ok(())
            }
        }
    }

    /// One label per token of `doc`.
    pub fn label_document(&self, doc: &Document) -> Result<Vec<Label>> {
        match self {
            Extractor::Crf(p) => Ok(p.extract(doc).labels),
            Extractor::Tagger { tagger, embeddings, .. } => tagger.label_document(doc, embeddings),
            Extractor::TextMap { model, embeddings, .. } => model.extract(doc, embeddings),
        }
    }

    /// Writes a small bundle manifest at `path` plus one file per component beside it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut parts = Vec::new();
        match self {
            Extractor::Crf(p) => {
                let c = component_path(path, "crf");
                p.save(&c)?;
                parts.push(c);
            }
            Extractor::Tagger { tagger, embeddings, .. } => {
                let (n, e) = (component_path(path, "net"), component_path(path, "emb"));
                tagger.save(&n)?;
                embeddings.save(&e)?;
                parts.extend([n, e]);
            }
            Extractor::TextMap { model, embeddings, .. } => {
                let (n, e) = (component_path(path, "net"), component_path(path, "emb"));
                model.save(&n)?;
                embeddings.save(&e)?;
                parts.extend([n, e]);
            }
        }
        let bundle = BundleFile {
            format: FORMAT.into(),
            method: self.method(),
            components: parts.iter().map(|p| file_name(p)).collect(),
        };
        let text = serde_json::to_string_pretty(&bundle)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let b: BundleFile = serde_json::from_str(&text).map_err(|e| Error::format(&origin, e.line(), e.to_string()))?;
        if b.format != FORMAT {
            return Err(Error::format(&origin, 1, format!("unsupported format {:?}", b.format)));
        }
        let expected = if b.method == Method::Crf { 1 } else { 2 };
        if b.components.len() != expected {
            return Err(Error::format(&origin, 1, format!("{} needs {expected} component files", b.method)));
        }
        let part = |i: usize| path.with_file_name(&b.components[i]);
        Ok(match b.method {
            Method::Crf => Extractor::Crf(TwoLayerPipeline::load(&part(0))?),
            Method::Bilstm | Method::BilstmCrf => Extractor::Tagger {
                method: b.method,
                tagger: Tagger::load(&part(0))?,
                embeddings: Embeddings::load(&part(1))?,
            },
            _ => Extractor::TextMap {
                method: b.method,
                model: TextMapModel::load(&part(0))?,
                embeddings: Embeddings::load(&part(1))?,
            },
        })
    }

    /// The bundle file plus every component file, in a fixed order.
    pub fn files(path: &Path) -> Result<Vec<PathBuf>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let b: BundleFile = serde_json::from_str(&text)?;
        let mut out = vec![path.to_path_buf()];
        for c in &b.components {
            let p = path.with_file_name(c);
            // embedding and network manifests carry an f32 payload
            let bin = p.with_extension("bin");
            out.push(p);
            if bin.exists() {
                out.push(bin);
            }
        }
        Ok(out)
    }
}
