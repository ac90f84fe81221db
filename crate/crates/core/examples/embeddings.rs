//! Trains skip-gram word and character n-gram vectors on a synthetic corpus,
//! lists word2vec nearest neighbours and compares both on misspelled words.
//!
//! Similarities are cosines of unit vectors with the vocabulary mean removed:
//! on a corpus this small one shared direction dominates every raw vector.
//!
//! cargo run --release --example embeddings

use metaforge::embeddings::{token_streams, train_char2vec, train_word2vec, Char2VecConfig, EmbeddingProvider, Word2VecConfig};
use metaforge::synth::{builtin_templates, synthesize_corpus, FieldSampler, NoiseConfig};
use metaforge::Result;

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

struct Space<'a> {
    provider: &'a dyn EmbeddingProvider,
    mean: Vec<f64>,
}

impl<'a> Space<'a> {
    fn new(provider: &'a dyn EmbeddingProvider, vocab: &[String]) -> Result<Self> {
        let mut mean = vec![0.0; provider.dim()];
        for w in vocab {
            let v = unit(provider.embed_token(w)?);
            mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / vocab.len() as f64);
        }
        Ok(Space { provider, mean })
    }

    fn vector(&self, w: &str) -> Result<Vec<f64>> {
        let v = unit(self.provider.embed_token(w)?);
        Ok(unit(v.iter().zip(&self.mean).map(|(x, m)| x - m).collect()))
    }

    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.vector(a)?.iter().zip(self.vector(b)?).map(|(x, y)| x * y).sum())
    }
}

fn main() -> Result<()> {
    let docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), 80, 5)?;
    let streams = token_streams(&docs);
    let mut vocab: Vec<String> = streams.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();

    let words = train_word2vec(&streams, &Word2VecConfig::default())?;
    let chars = train_char2vec(&streams, &Char2VecConfig::default())?;
    println!("{} word types, {} in the word2vec vocabulary, {} character n-grams", vocab.len(), words.vocab_size(), chars.gram_count());

    // rare words share hashed rows; search only the ones with a vector of their own
    let known: Vec<String> = vocab.iter().filter(|w| words.contains(w)).cloned().collect();
    let (ws, cs) = (Space::new(&words, &known)?, Space::new(&chars, &known)?);
    for q in ["abstract", "university", "journal", "september"] {
        let mut near: Vec<(f64, &String)> =
            known.iter().filter(|w| w.as_str() != q).map(|w| Ok((ws.similarity(q, w)?, w))).collect::<Result<_>>()?;
        near.sort_by(|a, b| b.0.total_cmp(&a.0));
        let shown: Vec<String> = near.iter().take(4).map(|(s, w)| format!("{w} {s:.2}")).collect();
        println!("{q:<11} {}", shown.join(", "));
    }

    // a misspelling has no word vector: word2vec falls back to a hashed bucket, char2vec to its n-grams
    for (word, typo) in [("university", "univresity"), ("department", "departmnet"), ("journal", "jounral")] {
        println!("{word} vs {typo}: word2vec {:.2}, char2vec {:.2}", ws.similarity(word, typo)?, cs.similarity(word, typo)?);
    }
    Ok(())
}
