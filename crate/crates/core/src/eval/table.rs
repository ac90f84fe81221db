use super::metrics::MetricsReport;
use crate::model::Label;

/// Decimal half-up rounding to `places` digits, e.g. `0.7305 → "0.731"`.
///
/// Rounds the shortest decimal representation of `x`, so values that print as a tie
/// round up even when their binary value sits just below it.
pub fn round_half_up(x: f64, places: usize) -> String {
    let neg = x < 0.0;
    let s = format!("{}", x.abs());
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let mut digits: Vec<u8> = int.bytes().chain(frac.bytes().chain(std::iter::repeat(b'0')).take(places)).map(|b| b - b'0').collect();
    let round_up = frac.as_bytes().get(places).is_some_and(|&b| b >= b'5');
    if round_up {
        let mut k = digits.len();
        loop {
            if k == 0 {
                digits.insert(0, 1);
                break;
            }
            k -= 1;
            if digits[k] == 9 {
                digits[k] = 0;
            } else {
                digits[k] += 1;
                break;
            }
        }
    }
    let split = digits.len() - places;
    let int: String = digits[..split].iter().map(|d| (b'0' + d) as char).collect();
    let frac: String = digits[split..].iter().map(|d| (b'0' + d) as char).collect();
    let sign = if neg && digits.iter().any(|&d| d != 0) { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

fn row_name(l: Label) -> &'static str {
    match l {
        Label::Doi => "DOI",
        l => l.name(),
    }
}

/// Per-class rows followed by macro and micro averages.
pub fn render_table(report: &MetricsReport) -> String {
    let header = ["Category", "Precision", "Recall", "F1-score"];
    let mut rows: Vec<[String; 4]> = Vec::new();
    for c in &report.classes {
        if c.gold() == 0 {
            rows.push([row_name(c.label).into(), "N/A".into(), "N/A".into(), "N/A".into()]);
        } else {
            rows.push([
                row_name(c.label).into(),
                round_half_up(c.prf.precision, 3),
                round_half_up(c.prf.recall, 3),
                round_half_up(c.prf.f1, 3),
            ]);
        }
    }
    for (name, p) in [("Macro Average", &report.macro_avg), ("Micro Average", &report.micro)] {
        rows.push([name.into(), round_half_up(p.precision, 3), round_half_up(p.recall, 3), round_half_up(p.f1, 3)]);
    }
    let w0 = rows.iter().map(|r| r[0].len()).chain([header[0].len()]).max().unwrap();
    let mut out = format!("{:<w0$}  {:>9}  {:>9}  {:>9}\n", header[0], header[1], header[2], header[3]);
    for r in &rows {
        out.push_str(&format!("{:<w0$}  {:>9}  {:>9}  {:>9}\n", r[0], r[1], r[2], r[3]));
    }
    out
}
