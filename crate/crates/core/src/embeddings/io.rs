use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::char2vec::{Char2VecConfig, Char2VecModel};
use super::precomputed::PrecomputedBlocks;
use super::word2vec::{Vocab, Word2VecConfig, Word2VecModel};
use super::{Embeddings, Mode};
use crate::error::{Error, Result};

pub const FORMAT: &str = "metaforge-emb/1";

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Body {
    Word2vec {
        words: Vec<String>,
        counts: Vec<u64>,
        unk_buckets: usize,
        config: Word2VecConfig,
        epoch_loss: Vec<f64>,
    },
    Char2vec {
        grams: Vec<String>,
        gram_counts: Vec<u64>,
        gram_buckets: usize,
        config: Char2VecConfig,
        epoch_loss: Vec<f64>,
    },
    Precomputed {
        keys: Vec<(String, usize)>,
    },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    d: usize,
    mode: Mode,
    vocab_size: usize,
    /// Payload file name, relative to the manifest.
    payload: String,
    #[serde(flatten)]
    body: Body,
}

/// Payload sits beside the manifest with a `.bin` extension.
pub fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

fn to_bytes<'a>(rows: impl Iterator<Item = &'a f32>) -> Vec<u8> {
    rows.flat_map(|x| x.to_le_bytes()).collect()
}

fn from_bytes(bytes: &[u8], path: &Path) -> Result<Vec<f32>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path.display().to_string(), 0, "payload length is not a multiple of 4"));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub(crate) fn save(e: &Embeddings, path: &Path) -> Result<()> {
    let bin = payload_path(path);
    let (body, payload, vocab_size) = match e {
        Embeddings::Word2Vec(m) => (
            Body::Word2vec {
                words: m.vocab.words.clone(),
                counts: m.vocab.counts.clone(),
                unk_buckets: m.vocab.buckets,
                config: m.config.clone(),
                epoch_loss: m.epoch_loss.clone(),
            },
            to_bytes(m.input.iter()),
            m.vocab.words.len(),
        ),
        Embeddings::Char2Vec(m) => (
            Body::Char2vec {
                grams: m.grams.words.clone(),
                gram_counts: m.grams.counts.clone(),
                gram_buckets: m.grams.buckets,
                config: m.config.clone(),
                epoch_loss: m.epoch_loss.clone(),
            },
            to_bytes(m.input.iter()),
            m.grams.words.len(),
        ),
        Embeddings::Precomputed(p) => (
            Body::Precomputed {
                keys: p.vectors.keys().cloned().collect(),
            },
            to_bytes(p.vectors.values().flatten()),
            p.vectors.len(),
        ),
    };
    let manifest = Manifest {
        format: FORMAT.to_string(),
        d: e.dim_of(),
        mode: e.mode_of(),
        vocab_size,
        payload: bin.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        body,
    };
    fs::write(&bin, payload).map_err(|err| Error::io(&bin, err))?;
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(path, json).map_err(|err| Error::io(path, err))
}

pub(crate) fn load(path: &Path) -> Result<Embeddings> {
    let text = fs::read_to_string(path).map_err(|err| Error::io(path, err))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != FORMAT {
        return Err(Error::format(path.display().to_string(), 1, format!("unsupported format {:?}", m.format)));
    }
    if m.d == 0 {
        return Err(Error::format(path.display().to_string(), 1, "dimension must be positive"));
    }
    let bin = path.with_file_name(&m.payload);
    let bytes = fs::read(&bin).map_err(|err| Error::io(&bin, err))?;
    let data = from_bytes(&bytes, &bin)?;
    let expect = |rows: usize| {
        if data.len() != rows * m.d {
            Err(Error::format(
                bin.display().to_string(),
                0,
                format!("payload holds {} values, expected {}", data.len(), rows * m.d),
            ))
        } else {
            Ok(())
        }
    };
    Ok(match m.body {
        Body::Word2vec {
            words,
            counts,
            unk_buckets,
            config,
            epoch_loss,
        } => {
            let vocab = Vocab::from_parts(words, counts, unk_buckets);
            expect(vocab.rows())?;
            Embeddings::Word2Vec(Word2VecModel {
                vocab,
                dim: m.d,
                input: data,
                output: Vec::new(),
                config,
                epoch_loss,
            })
        }
        Body::Char2vec {
            grams,
            gram_counts,
            gram_buckets,
            config,
            epoch_loss,
        } => {
            let grams = Vocab::from_parts(grams, gram_counts, gram_buckets);
            expect(grams.rows())?;
            Embeddings::Char2Vec(Char2VecModel {
                grams,
                dim: m.d,
                ngram: config.ngram,
                input: data,
                output: Vec::new(),
                config,
                epoch_loss,
            })
        }
        Body::Precomputed { keys } => {
            expect(keys.len())?;
            let mut p = PrecomputedBlocks::new(m.d);
            for (k, row) in keys.into_iter().zip(data.chunks_exact(m.d)) {
                p.insert(&k.0, k.1, row.to_vec())?;
            }
            Embeddings::Precomputed(p)
        }
    })
}
