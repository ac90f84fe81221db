//! Any extraction method end to end: train, save, reload, label, time.
//!
//! cargo run --release --example pipeline -- bilstm-crf

use metaforge::eval::{score, time_inference};
use metaforge::pipeline::{train, Extractor, Method, TrainSettings};
use metaforge::synth::{builtin_templates, rasterize_page, synthesize_corpus, FieldSampler, NoiseConfig};

fn main() -> metaforge::Result<()> {
    let method: Method = std::env::args().nth(1).unwrap_or_else(|| "crf".into()).parse()?;
    let mut docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), 50, 21)?;
    if method.is_textmap() {
        for d in &mut docs {
            d.page.raster = Some(rasterize_page(d, 16)?);
        }
    }
    let (train_docs, test) = docs.split_at(40);
    let mut settings = TrainSettings { seed: 1, ..Default::default() };
    settings.seq.epochs = 10;
    settings.textmap_train.epochs = 10;
    let trained = train(method, train_docs, &settings, None)?;

    let dir = std::env::temp_dir().join(format!("metaforge-{method}"));
    std::fs::create_dir_all(&dir).map_err(|e| metaforge::Error::io(&dir, e))?;
    let path = dir.join("model.json");
    trained.save(&path)?;
    let back = Extractor::load(&path)?;
    assert_eq!(back, trained);
    println!("saved {method} as {:?}", Extractor::files(&path)?);

    let preds = test.iter().map(|d| back.label_document(d)).collect::<metaforge::Result<Vec<_>>>()?;
    println!("macro F1 {:.3}", score(test, &preds)?.macro_avg.f1);
    let t = time_inference(|d| drop(back.label_document(d)), test, 3)?;
    println!("{:.2} ms per document (sd {:.2})", 1e3 * t.mean, 1e3 * t.stddev);
    Ok(())
}
