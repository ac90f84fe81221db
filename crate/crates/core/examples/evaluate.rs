//! Scores hand-made predictions and prints the per-class table.
//!
//! cargo run --release --example evaluate

use metaforge::eval::{f1, fixture, render_table, round_half_up, score};

fn main() -> metaforge::Result<()> {
    println!("f1(0.754, 0.710) = {}", round_half_up(f1(0.754, 0.710), 3));
    let report = score(&[fixture::document()], &[fixture::PRED.to_vec()])?;
    print!("{}", render_table(&report));
    println!("token accuracy {:.3} over {} documents", report.confusion.accuracy(), report.documents);
    Ok(())
}
