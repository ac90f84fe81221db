//! Generates a few labeled first pages, prints one, and writes corpus plus rasters.
//!
//! cargo run --release --example synth_corpus -- /tmp/synth

use std::path::PathBuf;

use metaforge::synth::{builtin_templates, synthesize_corpus, write_synth_output, FieldSampler, NoiseConfig};

fn main() -> metaforge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth-demo".into()));
    let noise = NoiseConfig { bbox_jitter: 2.0, corruption: 0.05 };
    let mut docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &noise, 5, 42)?;

    let d = &docs[0];
    println!("{}: {} tokens on a {}x{} pt page", d.id, d.tokens.len(), d.page.width, d.page.height);
    for a in &d.annotations {
        let text: Vec<&str> = a.token_indices.iter().map(|&i| d.tokens[i].text.as_str()).collect();
        let mut shown = text.join(" ");
        if shown.len() > 60 {
            shown.truncate(shown.char_indices().nth(57).map_or(shown.len(), |(i, _)| i));
            shown.push_str("...");
        }
        println!("  {:<12} {shown}", format!("{:?}", a.label));
    }

    let corpus = out.join("corpus.jsonl");
    write_synth_output(&mut docs, &corpus, Some(&out.join("rasters")), 72)?;
    println!("wrote {} documents to {}", docs.len(), corpus.display());
    Ok(())
}
