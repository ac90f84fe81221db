//! Token-level evaluation: confusion counts, P/R/F1 reports, tables and timing.

mod metrics;
mod predictions;
mod table;
mod timing;

pub use metrics::{f1, score, ClassMetrics, ConfusionCounts, MetricsReport, Prf, TimingStats};
pub use predictions::{
    load_external_predictions, parse_predictions, predictions_to_jsonl, write_predictions, PredictionRecord,
};
pub use table::{render_table, round_half_up};
pub use timing::time_inference;

/// The 20-token fixture used by the tests and the acceptance suite.
#[doc(hidden)]
pub mod fixture {
    use crate::model::{Annotation, BBox, Document, Label, Token};
    use Label::*;

    pub const GOLD: [Label; 20] = [
        Title, Title, Title, Title, Abstract, Abstract, Abstract, Abstract, Abstract, Authors, Authors, Authors, Email,
        Date, Date, Doi, Other, Other, Other, Other,
    ];
    pub const PRED: [Label; 20] = [
        Title, Title, Title, Other, Abstract, Abstract, Abstract, Title, Abstract, Authors, Authors, Affiliation,
        Email, Date, Journal, Doi, Other, Abstract, Other, Date,
    ];

    /// A document whose annotations spell out `GOLD`.
    pub fn document() -> Document {
        let tokens: Vec<Token> = (0..20)
            .map(|i| Token::new(format!("t{i}"), BBox::new(10.0 * i as f64, 0.0, 10.0 * i as f64 + 8.0, 10.0), 10.0))
            .collect();
        let mut d = Document::new("fixture-20", 612.0, 792.0, tokens);
        let mut start = 0;
        while start < 20 {
            let mut end = start + 1;
            while end < 20 && GOLD[end] == GOLD[start] {
                end += 1;
            }
            d.annotations
                .push(Annotation::from_tokens(GOLD[start], (start..end).collect(), &d.tokens).unwrap());
            start = end;
        }
        d
    }

    pub const TABLE: &str = include_str!("fixture_table.txt");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Document, Label};
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        assert_eq!(round_half_up(f1(0.754, 0.710), 3), "0.731");
        assert_eq!(f1(1.0, 1.0), 1.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(0.7305, 3), "0.731");
        assert_eq!(round_half_up(0.7304999, 3), "0.730");
        assert_eq!(round_half_up(0.9995, 3), "1.000");
        assert_eq!(round_half_up(1.0, 3), "1.000");
        assert_eq!(round_half_up(0.0, 3), "0.000");
        assert_eq!(round_half_up(0.63125, 3), "0.631");
        assert_eq!(round_half_up(2.5, 0), "3");
    }

    fn fixture_report() -> MetricsReport {
        score(&[fixture::document()], &[fixture::PRED.to_vec()]).unwrap()
    }

    #[test]
    fn fixture_matches_hand_computation() {
        let r = fixture_report();
        let c = |l| r.class(l).unwrap();
        assert_eq!((c(Label::Title).tp, c(Label::Title).fp, c(Label::Title).fn_), (3, 1, 1));
        assert_eq!(c(Label::Title).prf, Prf { precision: 0.75, recall: 0.75, f1: 0.75 });
        assert_eq!((c(Label::Abstract).tp, c(Label::Abstract).fp, c(Label::Abstract).fn_), (4, 1, 1));
        assert_eq!(c(Label::Abstract).prf, Prf { precision: 0.8, recall: 0.8, f1: f1(0.8, 0.8) });
        assert_eq!(c(Label::Authors).prf.precision, 1.0);
        assert_eq!(c(Label::Authors).prf.recall, 2.0 / 3.0);
        assert_eq!(c(Label::Authors).prf.f1, f1(1.0, 2.0 / 3.0));
        assert_eq!(c(Label::Email).prf.f1, 1.0);
        assert_eq!(c(Label::Date).prf, Prf { precision: 0.5, recall: 0.5, f1: 0.5 });
        assert_eq!((c(Label::Journal).fp, c(Label::Journal).gold()), (1, 0));
        assert_eq!(c(Label::Affiliation).fp, 1);
        assert_eq!(c(Label::Address).tp + c(Label::Address).fp + c(Label::Address).fn_, 0);
        assert_eq!(c(Label::Doi).prf.f1, 1.0);
        // Address is absent everywhere and drops out; Journal and Affiliation count as zeros
        assert_eq!(r.macro_avg.precision, (0.75 + 0.8 + 1.0 + 1.0 + 0.5 + 0.0 + 0.0 + 1.0) / 8.0);
        assert_eq!(r.macro_avg.recall, (0.75 + 0.8 + 2.0 / 3.0 + 1.0 + 0.5 + 0.0 + 0.0 + 1.0) / 8.0);
        assert_eq!(r.macro_avg.f1, (0.75 + f1(0.8, 0.8) + f1(1.0, 2.0 / 3.0) + 1.0 + 0.5 + 0.0 + 0.0 + 1.0) / 8.0);
        assert_eq!(r.micro, Prf { precision: 12.0 / 17.0, recall: 12.0 / 16.0, f1: f1(12.0 / 17.0, 0.75) });
        assert!((r.micro.f1 - 24.0 / 33.0).abs() < 1e-15);
    }

    #[test]
    fn fixture_table_matches_golden_file() {
        assert_eq!(render_table(&fixture_report()), fixture::TABLE);
    }

    #[test]
    fn perfect_and_all_other_predictions() {
        let d = fixture::document();
        let r = score(std::slice::from_ref(&d), &[fixture::GOLD.to_vec()]).unwrap();
        assert_eq!(r.macro_avg, Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(r.micro.f1, 1.0);
        let r = score(std::slice::from_ref(&d), &[vec![Label::Other; 20]]).unwrap();
        assert!(r.classes.iter().all(|c| c.prf.recall == 0.0));
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(score(&[fixture::document()], &[vec![Label::Other; 19]]).is_err());
        assert!(score(&[fixture::document()], &[]).is_err());
    }

    #[test]
    fn micro_scores_agree_without_background_tokens() {
        // every token has a metadata label on both sides
        let d = fixture::document();
        let mut d2 = d.clone();
        d2.annotations.retain(|a| a.label != Label::Other);
        d2.tokens.truncate(16);
        let pred: Vec<Label> = fixture::PRED[..16].iter().map(|&l| if l == Label::Other { Label::Title } else { l }).collect();
        let r = score(&[d2], &[pred]).unwrap();
        assert_eq!(r.micro.precision, r.micro.recall);
        assert_eq!(r.micro.recall, r.micro.f1);
    }

    #[test]
    fn predictions_round_trip_and_reject_bad_input() {
        let d = fixture::document();
        let gold = vec![d.clone()];
        let text = predictions_to_jsonl(&[&d.id], &[fixture::PRED.to_vec()]).unwrap();
        let back = parse_predictions(&text, "p.jsonl", &gold).unwrap();
        assert_eq!(score(&gold, &back).unwrap(), fixture_report());

        let banana = text.replacen("\"Title\"", "\"Banana\"", 1);
        let e = parse_predictions(&banana, "p.jsonl", &gold).unwrap_err();
        assert!(e.to_string().contains("Banana"), "{e}");

        let two = format!("{text}{}", &text[..text.len() / 2]);
        let e = parse_predictions(&two, "p.jsonl", &gold).unwrap_err();
        assert!(e.to_string().contains("p.jsonl:2"), "{e}");

        let unknown = text.replace("fixture-20", "nope");
        assert!(parse_predictions(&unknown, "p.jsonl", &gold).is_err());
    }

    #[test]
    fn timing_records_each_repeat() {
        let docs = vec![Document::new("a", 1.0, 1.0, vec![])];
        let t = time_inference(|_| std::thread::sleep(std::time::Duration::from_millis(10)), &docs, 3).unwrap();
        assert_eq!(t.runs.len(), 3);
        assert!(t.stddev >= 0.0);
        assert!((0.009..0.030).contains(&t.mean), "mean {}", t.mean);
        assert!(time_inference(|_| {}, &docs, 2).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let r = fixture_report();
        let back: MetricsReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn counts_are_conserved_and_order_free(seed in 0u64..500) {
            use rand::Rng;
            let mut r = crate::util::rng(seed);
            let d = fixture::document();
            let docs = vec![d.clone(), d.clone(), d];
            let preds: Vec<Vec<Label>> = (0..3)
                .map(|_| (0..20).map(|_| Label::ALL[r.gen_range(0..Label::COUNT)]).collect())
                .collect();
            let a = score(&docs, &preds).unwrap();
            let gold_meta = docs.iter().flat_map(|d| d.token_labels()).filter(|l| l.is_metadata()).count();
            prop_assert_eq!(a.classes.iter().map(|c| c.tp + c.fn_).sum::<usize>(), gold_meta);
            for c in &a.classes {
                prop_assert!((c.prf.f1 - f1(c.prf.precision, c.prf.recall)).abs() == 0.0);
                prop_assert!((0.0..=1.0).contains(&c.prf.f1));
            }
            let rev_docs: Vec<_> = docs.iter().rev().cloned().collect();
            let rev_preds: Vec<_> = preds.iter().rev().cloned().collect();
            prop_assert_eq!(score(&rev_docs, &rev_preds).unwrap(), a);
        }
    }
}
