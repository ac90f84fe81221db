//! Token and block embedding providers.

mod char2vec;
mod io;
mod precomputed;
mod word2vec;


use std::path::Path;

use serde::{Deserialize, Serialize};

pub use char2vec::{char_ngrams, train_char2vec, Char2VecConfig, Char2VecModel};
pub use io::{payload_path, FORMAT};
pub use precomputed::PrecomputedBlocks;
pub use word2vec::{train_word2vec, Word2VecConfig, Word2VecModel, MIN_CORPUS_TOKENS};

use crate::error::{Error, Result};
use crate::model::Document;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    PerToken,
    PerBlock,
}

pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn mode(&self) -> Mode;
    /// Fails for per-block providers.
    fn embed_token(&self, text: &str) -> Result<Vec<f64>>;
    /// Per-token providers average their token vectors; per-block ones look up `(doc, block)`.
    fn embed_block(&self, doc: &str, block: usize, tokens: &[&str]) -> Result<Vec<f64>>;
}

/// Lookup key used by the per-token providers.
pub fn normalize_token(text: &str) -> String {
    text.to_lowercase()
}

/// One lowercased token stream per document, in reading order.
pub fn token_streams(docs: &[Document]) -> Vec<Vec<String>> {
    docs.iter()
        .map(|d| d.tokens.iter().map(|t| normalize_token(&t.text)).collect())
        .collect()
}

fn mean_of(dim: usize, tokens: &[&str], f: impl Fn(&str) -> Vec<f64>) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::invalid("cannot embed an empty block"));
    }
    let mut v = vec![0.0; dim];
    for t in tokens {
        for (a, b) in v.iter_mut().zip(f(t)) {
            *a += b;
        }
    }
    let k = tokens.len() as f64;
    v.iter_mut().for_each(|a| *a /= k);
    Ok(v)
}

impl EmbeddingProvider for Word2VecModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mode(&self) -> Mode {
        Mode::PerToken
    }

    fn embed_token(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.row(&normalize_token(text)).iter().map(|&x| x as f64).collect())
    }

    fn embed_block(&self, _doc: &str, _block: usize, tokens: &[&str]) -> Result<Vec<f64>> {
        mean_of(self.dim, tokens, |t| self.row(&normalize_token(t)).iter().map(|&x| x as f64).collect())
    }
}

impl EmbeddingProvider for Char2VecModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mode(&self) -> Mode {
        Mode::PerToken
    }

    fn embed_token(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.embed(&normalize_token(text)))
    }

    fn embed_block(&self, _doc: &str, _block: usize, tokens: &[&str]) -> Result<Vec<f64>> {
        mean_of(self.dim, tokens, |t| self.embed(&normalize_token(t)))
    }
}

impl EmbeddingProvider for PrecomputedBlocks {
    fn dim(&self) -> usize {
        self.dim
    }

    fn mode(&self) -> Mode {
        Mode::PerBlock
    }

    fn embed_token(&self, _text: &str) -> Result<Vec<f64>> {
        Err(Error::invalid("precomputed block embeddings have no per-token vectors"))
    }

    fn embed_block(&self, doc: &str, block: usize, _tokens: &[&str]) -> Result<Vec<f64>> {
        Ok(self.get(doc, block)?.iter().map(|&x| x as f64).collect())
    }
}

/// Any provider, with file I/O.
#[derive(Clone, Debug, PartialEq)]
pub enum Embeddings {
    Word2Vec(Word2VecModel),
    Char2Vec(Char2VecModel),
    Precomputed(PrecomputedBlocks),
}

impl Embeddings {
    fn inner(&self) -> &dyn EmbeddingProvider {
        match self {
            Embeddings::Word2Vec(m) => m,
            Embeddings::Char2Vec(m) => m,
            Embeddings::Precomputed(p) => p,
        }
    }

    pub(crate) fn dim_of(&self) -> usize {
        self.inner().dim()
    }

    pub(crate) fn mode_of(&self) -> Mode {
        self.inner().mode()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Embeddings::Word2Vec(_) => "word2vec",
            Embeddings::Char2Vec(_) => "char2vec",
            Embeddings::Precomputed(_) => "precomputed",
        }
    }

    /// Writes the JSON manifest to `path` and the f32 payload beside it.
    pub fn save(&self, path: &Path) -> Result<()> {
        io::save(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::load(path)
    }
}

impl EmbeddingProvider for Embeddings {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn mode(&self) -> Mode {
        self.inner().mode()
    }

    fn embed_token(&self, text: &str) -> Result<Vec<f64>> {
        self.inner().embed_token(text)
    }

    fn embed_block(&self, doc: &str, block: usize, tokens: &[&str]) -> Result<Vec<f64>> {
        self.inner().embed_block(doc, block, tokens)
    }
}

/// Freezes the block vectors of `docs` under `provider` into a precomputed table.
pub fn precompute_blocks(docs: &[Document], provider: &dyn EmbeddingProvider) -> Result<PrecomputedBlocks> {
    let mut out = PrecomputedBlocks::new(provider.dim());
    for d in docs {
        for b in d.blocks() {
            let words: Vec<&str> = b.token_indices.iter().map(|&i| d.tokens[i].text.as_str()).collect();
            let v = provider.embed_block(&d.id, b.id, &words)?;
            out.insert(&d.id, b.id, v.into_iter().map(|x| x as f32).collect())?;
        }
    }
    Ok(out)
}
