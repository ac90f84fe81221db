//! Trains the BiLSTM and BiLSTM-CRF taggers over word2vec inputs and compares them.
//!
//! cargo run --release --example bilstm_tagger

use metaforge::embeddings::{token_streams, train_word2vec, Word2VecConfig};
use metaforge::eval::score;
use metaforge::seqlab::{train_tagger, Architecture, SeqTrainConfig, TaggerKind};
use metaforge::synth::{builtin_templates, synthesize_corpus, FieldSampler, NoiseConfig};

fn main() -> metaforge::Result<()> {
    let noise = NoiseConfig { bbox_jitter: 1.0, corruption: 0.02 };
    let docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &noise, 80, 3)?;
    let (train, test) = docs.split_at(60);
    let vectors = train_word2vec(&token_streams(train), &Word2VecConfig::default())?;
    let cfg = SeqTrainConfig { epochs: 10, ..Default::default() };

    for kind in [TaggerKind::Bilstm, TaggerKind::BilstmCrf] {
        let (tagger, report) = train_tagger(kind, train, &vectors, &Architecture::desk(), true, &cfg)?;
        let preds = test.iter().map(|d| tagger.label_document(d, &vectors)).collect::<metaforge::Result<Vec<_>>>()?;
        let r = score(test, &preds)?;
        let first = report.epoch_loss.first().copied().unwrap_or(f64::NAN);
        let last = report.epoch_loss.last().copied().unwrap_or(f64::NAN);
        println!(
            "{:<10} loss {first:.3} -> {last:.3}, macro F1 {:.3}, token accuracy {:.3}",
            tagger.kind(),
            r.macro_avg.f1,
            r.confusion.accuracy()
        );
    }
    Ok(())
}
