use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{TextMapConfig, TextMapModel};
use crate::embeddings::Mode;
use crate::error::{Error, Result};
use crate::util::rng;

pub const FORMAT: &str = "metaforge-textmap/1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    mode: Mode,
    d: usize,
    #[serde(rename = "C")]
    channels: usize,
    n_h: usize,
    config: TextMapConfig,
    tensors: Vec<usize>,
    payload: String,
}

pub(crate) fn save(m: &TextMapModel, path: &Path) -> Result<()> {
    let bin = path.with_extension("bin");
    let manifest = Manifest {
        format: FORMAT.to_string(),
        mode: m.config.mode,
        d: m.d,
        channels: m.config.channels,
        n_h: m.config.heads,
        config: m.config.clone(),
        tensors: m.tensors().iter().map(|t| t.len()).collect(),
        payload: bin.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let bytes: Vec<u8> = m.flat_params().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    fs::write(path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(path, e))
}

pub(crate) fn load(path: &Path) -> Result<TextMapModel> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != FORMAT {
        return Err(Error::format(&origin, 1, format!("unsupported format {:?}", m.format)));
    }
    let mut model = TextMapModel::init(m.config, m.d, &mut rng(0)).map_err(|e| Error::format(&origin, 1, e.to_string()))?;
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let bin = path.with_file_name(&m.payload);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if shapes != m.tensors || bytes.len() != 4 * shapes.iter().sum::<usize>() {
        return Err(Error::format(bin.display().to_string(), 0, "payload does not match the declared tensors"));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    model.set_flat_params(&flat);
    Ok(model)
}
