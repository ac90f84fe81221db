//! JSON Lines corpus files, one [`Document`] per line.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::document::Document;
use super::raster::GrayImage;
use crate::error::{Error, Result};

pub fn read_corpus_str(text: &str, origin: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).map_err(|e| Error::format(origin, n + 1, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::format(path.display().to_string(), n + 1, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus_string(docs: &[Document]) -> Result<String> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(write_corpus_string(docs)?.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Loads every `raster_path` (relative paths resolve against `base`).
pub fn load_rasters(docs: &mut [Document], base: &Path) -> Result<()> {
    for d in docs.iter_mut() {
        if let Some(p) = &d.page.raster_path {
            let path = base.join(p);
            d.page.raster = Some(GrayImage::load_pgm(&path)?);
        }
    }
    Ok(())
}
