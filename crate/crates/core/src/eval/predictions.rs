use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, Label};

/// One line of a predictions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub token_labels: Vec<String>,
}

pub fn predictions_to_jsonl(ids: &[&str], labels: &[Vec<Label>]) -> Result<String> {
    let mut out = String::new();
    for (id, ls) in ids.iter().zip(labels) {
        let rec = PredictionRecord {
            id: id.to_string(),
            token_labels: ls.iter().map(|l| l.name().to_string()).collect(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, docs: &[Document], labels: &[Vec<Label>]) -> Result<()> {
    let ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    fs::write(path, predictions_to_jsonl(&ids, labels)?).map_err(|e| Error::io(path, e))
}

/// Parses predictions and orders them like `gold`.
pub fn parse_predictions(text: &str, origin: &str, gold: &[Document]) -> Result<Vec<Vec<Label>>> {
    let slot: HashMap<&str, usize> = gold.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let mut out: Vec<Option<Vec<Label>>> = vec![None; gold.len()];
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::format(origin, n + 1, m);
        let rec: PredictionRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let &i = slot.get(rec.id.as_str()).ok_or_else(|| err(format!("unknown document id {:?}", rec.id)))?;
        let labels = rec
            .token_labels
            .iter()
            .map(|s| s.parse::<Label>().map_err(|_| err(format!("unknown label {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if out[i].replace(labels).is_some() {
            return Err(err(format!("duplicate document id {:?}", rec.id)));
        }
    }
    out.into_iter()
        .zip(gold)
        .map(|(p, d)| p.ok_or_else(|| Error::invalid(format!("{origin}: no predictions for document {}", d.id))))
        .collect()
}

pub fn load_external_predictions(path: &Path, gold: &[Document]) -> Result<Vec<Vec<Label>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, &path.display().to_string(), gold)
}
