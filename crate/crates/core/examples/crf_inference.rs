//! Exact inference on a hand-built chain, then the two-layer CRF on a small corpus.
//!
//! cargo run --release --example crf_inference

use metaforge::crf::{log_partition, marginals, sequence_log_prob, train_two_layer, viterbi, default_excluded, CrfTrainConfig, Potentials};
use metaforge::eval::{render_table, score};
use metaforge::synth::{builtin_templates, synthesize_corpus, FieldSampler, NoiseConfig};

fn main() -> metaforge::Result<()> {
    // three positions, two labels; label 1 likes to follow itself
    let mut p = Potentials::zeros(3, 2);
    p.unary = vec![1.0, 0.0, 0.0, 0.5, 0.2, 0.2];
    p.trans = vec![0.0, -1.0, -1.0, 1.5];
    let m = marginals(&p);
    println!("log Z = {:.4} (direct {:.4})", m.log_z, log_partition(&p));
    for i in 0..3 {
        println!("P(y{i} = 1) = {:.4}", m.at(i, 1));
    }
    let best = viterbi(&p);
    println!("viterbi {best:?}, log p = {:.4}", sequence_log_prob(&p, &best)?);

    let docs = synthesize_corpus(&builtin_templates(), &FieldSampler::default(), &NoiseConfig::default(), 60, 1)?;
    let (train, test) = docs.split_at(40);
    let (pipeline, reports) = train_two_layer(train, &CrfTrainConfig::default(), &default_excluded())?;
    println!("section layer: {} accepted steps, converged {}", reports.layer1.objective.len() - 1, reports.layer1.converged);
    let preds: Vec<_> = test.iter().map(|d| pipeline.extract(d).labels).collect();
    print!("{}", render_table(&score(test, &preds)?));
    Ok(())
}
