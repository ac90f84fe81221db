//! Recovers annotations by matching gateway metadata against page text, typo included.
//!
//! cargo run --release --example align_metadata

use metaforge::align::{build_record, document_doi, AlignOutcome, AlignThresholds, GatewayRecord};
use metaforge::synth::{builtin_templates, synthesize_corpus, FieldSampler, NoiseConfig};

fn main() -> metaforge::Result<()> {
    let doc = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), 1, 9)?.remove(0);
    let record = GatewayRecord {
        doi: document_doi(&doc).to_string(),
        metadata: doc.metadata.clone().unwrap_or_default(),
        pdf_url: None,
    };

    let mut page = doc.clone();
    page.annotations.clear();
    // one OCR-style slip in the first title token
    let title = doc.annotations.iter().find(|a| a.label == metaforge::Label::Title).unwrap();
    let t = &mut page.tokens[title.token_indices[0]].text;
    *t = t.replacen(|c: char| c.is_ascii_lowercase(), "q", 1);

    for (name, th) in [("exact", AlignThresholds::uniform(1.0)), ("fuzzy", AlignThresholds::default())] {
        match build_record(&page, &record, &th)? {
            AlignOutcome::Accepted(_, report) => {
                println!("{name}: {} fields matched, not found {:?}", report.matched.len(), report.unmatched);
                for m in &report.matched {
                    println!("  {:<12} tokens {:?} similarity {:.3} ({:?})", format!("{:?}", m.label), m.token_span, m.similarity, m.kind);
                }
            }
            AlignOutcome::Rejected(report) => println!("{name}: rejected, nothing matched for {}", report.id),
        }
    }
    Ok(())
}
