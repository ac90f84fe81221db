//! Trains a TextMap extractor on rasterized pages and shows its detections on one page.
//!
//! cargo run --release --example textmap_extract

use metaforge::embeddings::{token_streams, train_word2vec, Word2VecConfig};
use metaforge::eval::score;
use metaforge::synth::{builtin_templates, rasterize_page, synthesize_corpus, FieldSampler, NoiseConfig};
use metaforge::textmap::{train_textmap, TextMapConfig, TextMapTrainConfig};
use metaforge::Label;

fn main() -> metaforge::Result<()> {
    let mut docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), 60, 11)?;
    for d in &mut docs {
        d.page.raster = Some(rasterize_page(d, 16)?);
    }
    let (train, test) = docs.split_at(45);
    let vectors = train_word2vec(&token_streams(train), &Word2VecConfig::default())?;
    let tcfg = TextMapTrainConfig { epochs: 12, ..Default::default() };
    let (model, report) = train_textmap(train, &vectors, &TextMapConfig::default(), &tcfg)?;
    println!("objective per epoch: {:.3?}", report.epoch_objective);
    println!("loss weights exp(-s): {:.3?}", report.weights);

    let sample = model.prepare(&test[0], &vectors)?;
    for (r, det) in sample.regions.iter().zip(model.detect(&sample)).take(8) {
        let text: Vec<&str> = r.tokens.iter().map(|&i| test[0].tokens[i].text.as_str()).collect();
        println!("  {:<24} {:<12} p={:.2}", text.join(" "), format!("{:?}", Label::ALL[det.label]), det.score);
    }

    let preds = test.iter().map(|d| model.extract(d, &vectors)).collect::<metaforge::Result<Vec<_>>>()?;
    println!("held-out macro F1 {:.3}", score(test, &preds)?.macro_avg.f1);
    Ok(())
}
