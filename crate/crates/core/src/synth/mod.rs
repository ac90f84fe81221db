//! Synthetic first pages: templates, sampled metadata, layout and rasters.

mod layout;
mod sampler;
mod template;

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

pub use layout::{
    apply_noise, assign_blocks_by_similarity, layout_page, rasterize_page, NoiseConfig, BOLD_CHAR_WIDTH, CHAR_WIDTH,
    INK_BOLD, INK_REGULAR, LINE_PITCH, WORD_SPACE,
};
pub use sampler::{sample_metadata, FieldSampler};
pub use template::{builtin_templates, template_files, Alignment, Filler, Slot, Template};

use crate::error::{Error, Result};
use crate::model::{write_corpus, Document};
use crate::util::{derive_seed, rng};

pub fn document_id(index: usize) -> String {
    format!("synth-{index:06}")
}

/// Document `index` of the corpus seeded by `master_seed`; depends on nothing else.
pub fn synthesize_document(
    templates: &[Template],
    sampler: &FieldSampler,
    noise: &NoiseConfig,
    master_seed: u64,
    index: usize,
) -> Result<Document> {
    if templates.is_empty() {
        return Err(Error::invalid("no templates"));
    }
    let seed = derive_seed(master_seed, index as u64);
    let template = &templates[rng(seed).gen_range(0..templates.len())];
    let record = sample_metadata(sampler, derive_seed(seed, 1));
    let mut doc = layout::layout_with(template, &record, sampler, derive_seed(seed, 2))?;
    apply_noise(&mut doc, noise, derive_seed(seed, 3));
    doc.id = document_id(index);
    Ok(doc)
}

pub fn synthesize_corpus(
    templates: &[Template],
    sampler: &FieldSampler,
    noise: &NoiseConfig,
    n: usize,
    master_seed: u64,
) -> Result<Vec<Document>> {
    if n == 0 {
        return Err(Error::invalid("corpus size must be at least 1"));
    }
    (0..n)
        .into_par_iter()
        .map(|i| synthesize_document(templates, sampler, noise, master_seed, i))
        .collect()
}

/// Rasterizes every document into `raster_dir` as PGM, then writes the corpus.
///
/// Raster paths are stored relative to the corpus file's directory when possible.
pub fn write_synth_output(docs: &mut [Document], corpus: &Path, raster_dir: Option<&Path>, dpi: i64) -> Result<()> {
    if let Some(dir) = raster_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let base = corpus.parent().unwrap_or(Path::new(""));
        docs.par_iter_mut().try_for_each(|d| -> Result<()> {
            let img = rasterize_page(d, dpi)?;
            let path = dir.join(format!("{}.pgm", d.id));
            img.save_pgm(&path)?;
            d.page.raster_path = Some(relative_to(&path, base).to_string_lossy().into_owned());
            d.page.raster = Some(img);
            Ok(())
        })?;
    }
    write_corpus(corpus, docs)
}

fn relative_to(path: &Path, base: &Path) -> PathBuf {
    if let Ok(rest) = path.strip_prefix(base) {
        if !base.as_os_str().is_empty() || path.is_relative() {
            return rest.to_path_buf();
        }
    }
    fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}
