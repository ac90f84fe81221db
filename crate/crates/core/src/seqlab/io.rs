use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::heads::{BiLstmClassifier, BiLstmCrf, SequenceModel};
use super::{Architecture, Tagger, TaggerNet};
use crate::error::{Error, Result};
use crate::util::rng;

pub const FORMAT: &str = "metaforge-seqlab/1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    kind: String,
    arch: Architecture,
    input: usize,
    labels: usize,
    #[serde(default)]
    shape: bool,
    /// Length of each tensor, in payload order.
    tensors: Vec<usize>,
    payload: String,
}

pub(crate) fn save(t: &Tagger, path: &Path) -> Result<()> {
    let bin = path.with_extension("bin");
    let (tensors, flat) = match &t.net {
        TaggerNet::BiLstm(m) => (m.tensors().iter().map(|x| x.len()).collect(), m.flat_params()),
        TaggerNet::BiLstmCrf(m) => (m.tensors().iter().map(|x| x.len()).collect(), m.flat_params()),
    };
    let manifest = Manifest {
        format: FORMAT.to_string(),
        kind: t.kind().to_string(),
        arch: t.architecture(),
        input: t.input_dim(),
        labels: t.num_labels(),
        shape: t.shape,
        tensors,
        payload: bin.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let bytes: Vec<u8> = flat.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    fs::write(path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(path, e))
}

pub(crate) fn load(path: &Path) -> Result<Tagger> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != FORMAT {
        return Err(Error::format(&origin, 1, format!("unsupported format {:?}", m.format)));
    }
    let a = &m.arch;
    if a.hidden == 0 || a.layers == 0 || m.input == 0 || m.labels == 0 {
        return Err(Error::format(&origin, 1, "dimensions must be positive"));
    }
    let mut r = rng(0);
    let mut net = match m.kind.as_str() {
        "bilstm" => TaggerNet::BiLstm(BiLstmClassifier::init(m.input, a.hidden, a.layers, a.head, m.labels, &mut r)),
        "bilstm-crf" => TaggerNet::BiLstmCrf(BiLstmCrf::init(m.input, a.hidden, a.layers, m.labels, &mut r)),
        k => return Err(Error::format(&origin, 1, format!("unknown model kind {k:?}"))),
    };
    let bin = path.with_file_name(&m.payload);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let expected: usize = m.tensors.iter().sum();
    let shapes: Vec<usize> = match &net {
        TaggerNet::BiLstm(x) => x.tensors().iter().map(|v| v.len()).collect(),
        TaggerNet::BiLstmCrf(x) => x.tensors().iter().map(|v| v.len()).collect(),
    };
    if shapes != m.tensors || bytes.len() != 4 * expected {
        return Err(Error::format(bin.display().to_string(), 0, "payload does not match the declared tensors"));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    match &mut net {
        TaggerNet::BiLstm(x) => x.set_flat_params(&flat),
        TaggerNet::BiLstmCrf(x) => x.set_flat_params(&flat),
    }
    Ok(Tagger { net, shape: m.shape })
}
