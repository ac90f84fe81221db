use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Metadata classes of a first page. `Other` is the background class.
///
/// Declaration order is significant: it is the tie-breaking order used by
/// every argmax in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Title,
    Abstract,
    Authors,
    Email,
    Address,
    Date,
    Journal,
    Affiliation,
    Doi,
    Other,
}

impl Label {
    pub const COUNT: usize = 10;

    pub const ALL: [Label; 10] = [
        Label::Title,
        Label::Abstract,
        Label::Authors,
        Label::Email,
        Label::Address,
        Label::Date,
        Label::Journal,
        Label::Affiliation,
        Label::Doi,
        Label::Other,
    ];

    /// The nine metadata classes, i.e. everything except `Other`.
    pub const METADATA: [Label; 9] = [
        Label::Title,
        Label::Abstract,
        Label::Authors,
        Label::Email,
        Label::Address,
        Label::Date,
        Label::Journal,
        Label::Affiliation,
        Label::Doi,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Title => "Title",
            Label::Abstract => "Abstract",
            Label::Authors => "Authors",
            Label::Email => "Email",
            Label::Address => "Address",
            Label::Date => "Date",
            Label::Journal => "Journal",
            Label::Affiliation => "Affiliation",
            Label::Doi => "Doi",
            Label::Other => "Other",
        }
    }

    pub fn is_metadata(self) -> bool {
        self != Label::Other
    }

    /// Coarse page zone a label normally lives in.
    pub fn default_section(self) -> SectionLabel {
        match self {
            Label::Title => SectionLabel::Title,
            Label::Authors | Label::Email | Label::Address | Label::Affiliation => {
                SectionLabel::AuthorInformation
            }
            Label::Journal | Label::Date | Label::Doi => SectionLabel::Header,
            Label::Abstract | Label::Other => SectionLabel::Body,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown label {s:?}")))
    }
}

/// Layer-1 page sections of the two-layer CRF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectionLabel {
    Header,
    Title,
    AuthorInformation,
    Body,
    Footnote,
}

impl SectionLabel {
    pub const COUNT: usize = 5;

    pub const ALL: [SectionLabel; 5] = [
        SectionLabel::Header,
        SectionLabel::Title,
        SectionLabel::AuthorInformation,
        SectionLabel::Body,
        SectionLabel::Footnote,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<SectionLabel> {
        SectionLabel::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SectionLabel::Header => "Header",
            SectionLabel::Title => "Title",
            SectionLabel::AuthorInformation => "AuthorInformation",
            SectionLabel::Body => "Body",
            SectionLabel::Footnote => "Footnote",
        }
    }
}

impl fmt::Display for SectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SectionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SectionLabel::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown section {s:?}")))
    }
}
