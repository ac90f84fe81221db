use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BBox, Label, SectionLabel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    #[default]
    Left,
    Center,
    Right,
}

/// Text generator used for `Other` slots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Filler {
    #[default]
    Body,
    Heading,
    AbstractHeading,
    Keywords,
    Footnote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub label: Label,
    /// `[x0, y0, x1, y1]` as fractions of the page.
    pub region: [f64; 4],
    pub font_size: f64,
    #[serde(default)]
    pub bold: bool,
    #[serde(default)]
    pub italic: bool,
    #[serde(default)]
    pub align: Alignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionLabel>,
    #[serde(default)]
    pub filler: Filler,
    /// Word-count range for `Other` filler.
    #[serde(default = "default_words")]
    pub words: [usize; 2],
}

fn default_words() -> [usize; 2] {
    [30, 60]
}

impl Slot {
    pub fn section(&self) -> SectionLabel {
        self.section.unwrap_or_else(|| match (self.label, self.filler) {
            (Label::Other, Filler::Footnote) => SectionLabel::Footnote,
            (l, _) => l.default_section(),
        })
    }

    pub fn region_box(&self, width: f64, height: f64) -> BBox {
        let [x0, y0, x1, y1] = self.region;
        BBox::new(x0 * width, y0 * height, x1 * width, y1 * height)
    }
}

/// A page layout: where each field goes and how it is typeset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub name: String,
    #[serde(default = "default_width")]
    pub page_width: f64,
    #[serde(default = "default_height")]
    pub page_height: f64,
    /// Maximum per-slot offset in points, drawn uniformly per axis.
    #[serde(default)]
    pub jitter: f64,
    pub slots: Vec<Slot>,
}

fn default_width() -> f64 {
    612.0
}

fn default_height() -> f64 {
    792.0
}

impl Template {
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.slots.iter().map(|s| s.label).filter(|l| l.is_metadata())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("template {}: {m}", self.name)));
        if !self.slots.iter().any(|s| s.label == Label::Title) {
            return bad("no Title slot".into());
        }
        if !(self.jitter >= 0.0) {
            return bad("negative jitter".into());
        }
        let boxes: Vec<BBox> = self
            .slots
            .iter()
            .map(|s| s.region_box(self.page_width, self.page_height))
            .collect();
        for (i, (s, b)) in self.slots.iter().zip(&boxes).enumerate() {
            if !b.is_valid() || !b.within(self.page_width, self.page_height) {
                return bad(format!("slot {i} region {:?} is not inside the page", s.region));
            }
            if !(s.font_size > 0.0) {
                return bad(format!("slot {i} font size must be positive"));
            }
            if s.label.is_metadata() && self.slots[..i].iter().any(|o| o.label == s.label) {
                return bad(format!("label {} appears twice", s.label));
            }
        }
        // any pair of jittered regions must stay disjoint
        let margin = 2.0 * self.jitter;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let (a, b) = (&boxes[i], &boxes[j]);
                let sep_x = (b.x0 - a.x1).max(a.x0 - b.x1);
                let sep_y = (b.y0 - a.y1).max(a.y0 - b.y1);
                if sep_x <= margin && sep_y <= margin {
                    return bad(format!("slots {i} and {j} may overlap after jitter"));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let t: Template = toml::from_str(text).map_err(|e| Error::invalid(format!("template: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("templates always serialize")
    }

    /// Every `*.toml` file of a directory, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Template>> {
        let mut out = Vec::new();
        for p in template_files(dir)? {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            out.push(Template::from_toml(&text).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?);
        }
        if out.is_empty() {
            return Err(Error::invalid(format!("no templates in {}", dir.display())));
        }
        Ok(out)
    }
}

/// The `*.toml` files of `dir`, sorted by file name.
pub fn template_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    Ok(paths)
}

const BUILTIN: [&str; 9] = [
    include_str!("../../templates/classic_center.toml"),
    include_str!("../../templates/left_aligned.toml"),
    include_str!("../../templates/two_column.toml"),
    include_str!("../../templates/compact_header.toml"),
    include_str!("../../templates/footer_metadata.toml"),
    include_str!("../../templates/inset_abstract.toml"),
    include_str!("../../templates/report.toml"),
    include_str!("../../templates/minimal.toml"),
    include_str!("../../templates/right_header.toml"),
];

/// The templates shipped with the crate.
pub fn builtin_templates() -> Vec<Template> {
    BUILTIN
        .iter()
        .map(|t| Template::from_toml(t).expect("builtin templates are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_cover_all_labels() {
        let ts = builtin_templates();
        assert!(ts.len() >= 8);
        for l in Label::METADATA {
            assert!(ts.iter().any(|t| t.labels().any(|x| x == l)), "no template has {l}");
        }
    }

    #[test]
    fn template_without_title_is_rejected() {
        let mut t = builtin_templates().remove(0);
        t.slots.retain(|s| s.label != Label::Title);
        assert!(t.validate().is_err());
    }

    #[test]
    fn overlapping_slots_are_rejected() {
        let mut t = builtin_templates().remove(0);
        let r = t.slots[0].region;
        t.slots[1].region = r;
        assert!(t.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        for t in builtin_templates() {
            assert_eq!(Template::from_toml(&t.to_toml()).unwrap(), t);
        }
    }
}
