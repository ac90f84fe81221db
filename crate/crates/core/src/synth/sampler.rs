//! Random bibliographic field values.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::template::Filler;
use crate::model::{Label, MetadataRecord};
use crate::util::rng;

const FIRST: &[&str] = &[
    "Anna", "Lukas", "Maria", "Jonas", "Sofia", "Felix", "Laura", "Paul", "Elena", "David", "Clara", "Tobias",
    "Hannah", "Marco", "Julia", "Simon", "Nora", "Adrian", "Lea", "Viktor", "Ingrid", "Omar", "Priya", "Kenji",
    "Fatima", "Mateo", "Olga", "Samuel", "Yara", "Henrik", "Amelie", "Rafael", "Zeynep", "Bruno", "Mila", "Tariq",
    "Chiara", "Emil", "Leonie", "Aditya",
];

const LAST: &[&str] = &[
    "Schmidt", "Weber", "Rossi", "Novak", "Fischer", "Garcia", "Meyer", "Kowalski", "Jansen", "Hoffmann", "Moreau",
    "Bauer", "Lindqvist", "Costa", "Keller", "Nakamura", "Okafor", "Petrov", "Haddad", "Svensson", "Richter",
    "Marino", "Dubois", "Yilmaz", "Krause", "Santos", "Wagner", "Horvath", "Brandt", "Ferreira", "Kaya", "Berger",
    "Ivanova", "Lehmann", "Nguyen", "Schulz", "Romano", "Varga", "Engel", "Mehta",
];

const TITLE_ADJ: &[&str] = &[
    "Comparative", "Digital", "Political", "Social", "Urban", "Rural", "Transnational", "Institutional", "Migrant",
    "Democratic", "Economic", "Cultural", "Educational", "Regional", "Collective", "Informal", "Historical",
    "Gendered", "Local", "Global", "Civic", "Legal", "Religious", "Environmental", "Contested", "Everyday",
    "Precarious", "Emerging", "Sustainable", "Multilevel",
];

const TITLE_NOUN: &[&str] = &[
    "Inequality", "Participation", "Governance", "Mobility", "Identity", "Integration", "Labour", "Welfare",
    "Trust", "Citizenship", "Networks", "Movements", "Policy", "Media", "Memory", "Solidarity", "Youth", "Housing",
    "Care", "Representation", "Segregation", "Belonging", "Protest", "Education", "Employment", "Attitudes",
    "Reform", "Institutions", "Populism", "Migration", "Discourse", "Elites", "Households", "Communities",
    "Knowledge", "Borders", "Justice", "Poverty", "Ageing", "Voting",
];

const DOMAIN: &[&str] = &[
    "Europe", "Germany", "Eastern Europe", "Latin America", "the Balkans", "Scandinavia", "West Africa",
    "Post-Socialist States", "European Cities", "the Global South", "Southern Europe", "the Baltic States",
    "Central Asia", "the Mediterranean", "Rural Communities", "Metropolitan Regions", "the Digital Age",
    "Times of Crisis", "Welfare States", "Border Regions", "Coastal Towns", "Industrial Regions",
    "Post-War Societies", "Small States", "Federal Systems",
];

const ABS_OPEN: &[&str] = &[
    "This article examines", "This study investigates", "We analyse", "The paper explores", "This contribution discusses",
    "Drawing on survey data, we assess", "Using panel data, this study estimates", "We investigate",
];

const ABS_OBJ: &[&str] = &[
    "the determinants of", "recent changes in", "the relationship between", "patterns of", "the effects of",
    "regional variation in", "the dynamics of", "long-term trends in",
];

const ABS_WORDS: &[&str] = &[
    "respondents", "findings", "evidence", "analysis", "results", "suggest", "indicate", "significant", "effect",
    "sample", "survey", "interviews", "framework", "qualitative", "quantitative", "empirical", "theoretical",
    "approach", "contributes", "literature", "argue", "demonstrate", "mechanisms", "outcomes", "factors",
    "variation", "context", "comparison", "dataset", "estimates", "model", "implications", "policy", "strongly",
    "moderate", "associated", "individual", "structural", "perceptions", "levels", "across", "within", "among",
];

const BODY_WORDS: &[&str] = &[
    "introduction", "section", "chapter", "previous", "scholars", "debate", "earlier", "research", "has", "been",
    "however", "furthermore", "moreover", "therefore", "figure", "table", "respectively", "discussed", "below",
    "following", "later", "part", "outline", "turn", "first", "second", "finally", "note", "authors", "studies",
    "work", "question", "remains", "open", "address", "gap", "aim", "rest", "organised", "describes", "presents",
    "concludes", "overview", "background", "history", "scope", "term", "concept", "used", "widely",
];

const FUNCTION: &[&str] = &[
    "the", "of", "and", "in", "to", "a", "for", "on", "with", "that", "is", "are", "we", "this", "as", "by", "from",
];

const JOURNALS: &[&str] = &[
    "Journal of {D} Studies", "{D} Review", "International Journal of {D} Research", "Annals of {D}",
    "{D} Quarterly", "European Journal of {D}", "Historical Social Research", "Comparative {D} Politics",
];

const JOURNAL_FIELD: &[&str] = &[
    "Social", "Political", "Migration", "Urban", "Population", "Gender", "Labour", "Policy", "Sociological",
    "Public Administration", "Legal", "Media",
];

const DEPARTMENTS: &[&str] = &[
    "Sociology", "Political Science", "Economics", "Social Policy", "Geography", "Anthropology", "Law",
    "Communication Studies", "Public Administration", "History", "Demography", "Psychology",
];

const CITIES: &[&str] = &[
    "Mannheim", "Cologne", "Bologna", "Leiden", "Uppsala", "Ghent", "Krakow", "Porto", "Graz", "Tartu", "Geneva",
    "Bergen", "Aarhus", "Utrecht", "Freiburg", "Lyon", "Zagreb", "Brno", "Turku", "Salamanca",
];

const COUNTRIES: &[&str] = &[
    "Germany", "Italy", "Netherlands", "Sweden", "Belgium", "Poland", "Portugal", "Austria", "Estonia",
    "Switzerland", "Norway", "Denmark", "France", "Croatia", "Czechia", "Finland", "Spain",
];

const STREETS: &[&str] = &[
    "Schlossstraße", "Universitätsplatz", "Via Zamboni", "Rapenburg", "Kyrkogårdsgatan", "Sint-Pietersnieuwstraat",
    "Gołębia", "Rua do Campo", "Heinrichstraße", "Ülikooli", "Boulevard du Pont-d'Arve", "Nygårdsgaten",
];

const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

const FOOTNOTES: &[&str] = &[
    "This work is licensed under a Creative Commons Attribution 4.0 International License.",
    "All rights reserved. No part of this publication may be reproduced without permission.",
    "Corresponding author. The authors declare no competing interests.",
    "Published online as part of the open access collection. Page 1 of the article.",
    "The views expressed are those of the authors and not necessarily of the funding bodies.",
];

const HEADINGS: &[&str] = &["Introduction", "Background", "Motivation", "Theoretical Framework", "Context"];

/// Per-label text generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSampler {
    pub abstract_words: [usize; 2],
    pub max_authors: usize,
    pub year_range: [u32; 2],
}

impl Default for FieldSampler {
    fn default() -> Self {
        FieldSampler {
            abstract_words: [40, 80],
            max_authors: 4,
            year_range: [1995, 2024],
        }
    }
}

fn pick<'a, R: Rng>(r: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(r).copied().unwrap()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// ASCII-folds a name for use in an email local part or host.
fn mail_part(s: &str) -> String {
    s.chars()
        .filter_map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' => Some(c.to_ascii_lowercase()),
            'ä' | 'å' => Some('a'),
            'ö' | 'ø' => Some('o'),
            'ü' => Some('u'),
            _ => None,
        })
        .collect()
}

fn prose<R: Rng>(r: &mut R, words: &[&str], n: usize) -> String {
    let mut out: Vec<String> = Vec::with_capacity(n);
    let mut sentence_left = 0usize;
    for _ in 0..n {
        let start = sentence_left == 0;
        if start {
            sentence_left = r.gen_range(8..16);
        }
        let w = if r.gen_bool(0.35) { pick(r, FUNCTION) } else { pick(r, words) };
        sentence_left -= 1;
        let mut w = if start { capitalize(w) } else { w.to_string() };
        if sentence_left == 0 {
            w.push('.');
        }
        out.push(w);
    }
    if let Some(last) = out.last_mut() {
        if !last.ends_with('.') {
            last.push('.');
        }
    }
    out.join(" ")
}

impl FieldSampler {
    pub fn title<R: Rng>(&self, r: &mut R) -> String {
        let adj = pick(r, TITLE_ADJ);
        let n1 = pick(r, TITLE_NOUN);
        let n2 = pick(r, TITLE_NOUN);
        let d = pick(r, DOMAIN);
        let adj2 = pick(r, TITLE_ADJ);
        match r.gen_range(0..6) {
            0 => format!("{adj} {n1} and {n2} in {d}"),
            1 => format!("{n1} and {n2}: {adj} Evidence from {d}"),
            2 => format!("Towards {adj} {n1}? {adj2} {n2} in {d}"),
            3 => format!("The {adj} Politics of {n1} in {d}"),
            4 => format!("{adj} {n1}, {adj2} {n2} and the Future of {d}"),
            _ => format!("Rethinking {n1}: {adj} {n2} across {d}"),
        }
    }

    fn names<R: Rng>(&self, r: &mut R) -> Vec<(String, String)> {
        let n = r.gen_range(1..=self.max_authors.max(1));
        (0..n)
            .map(|_| (pick(r, FIRST).to_string(), pick(r, LAST).to_string()))
            .collect()
    }

    pub fn abstract_text<R: Rng>(&self, r: &mut R) -> String {
        let n = r.gen_range(self.abstract_words[0]..=self.abstract_words[1].max(self.abstract_words[0]));
        let lead = format!("{} {} {}.", pick(r, ABS_OPEN), pick(r, ABS_OBJ), pick(r, TITLE_NOUN).to_lowercase());
        let head_len = lead.split(' ').count();
        format!("{lead} {}", prose(r, ABS_WORDS, n.saturating_sub(head_len).max(4)))
    }

    pub fn journal<R: Rng>(&self, r: &mut R) -> String {
        let name = pick(r, JOURNALS).replace("{D}", pick(r, JOURNAL_FIELD));
        format!("{name}, Vol. {}, No. {}", r.gen_range(1..60), r.gen_range(1..12))
    }

    pub fn date<R: Rng>(&self, r: &mut R) -> String {
        let y = r.gen_range(self.year_range[0]..=self.year_range[1]);
        let m = pick(r, MONTHS);
        match r.gen_range(0..3) {
            0 => format!("{} {m} {y}", r.gen_range(1..29)),
            1 => format!("Published: {} {m} {y}", r.gen_range(1..29)),
            _ => format!("{m} {y}"),
        }
    }

    pub fn doi<R: Rng>(&self, r: &mut R) -> String {
        let prefix: u32 = r.gen_range(1000..99999);
        let abbrev: String = (0..r.gen_range(3..5)).map(|_| r.gen_range(b'a'..=b'z') as char).collect();
        format!("10.{prefix}/{abbrev}.{}.{}", r.gen_range(1995..2025), r.gen_range(1..9999))
    }

    pub fn affiliation<R: Rng>(&self, r: &mut R) -> String {
        let dep = pick(r, DEPARTMENTS);
        let city = pick(r, CITIES);
        match r.gen_range(0..3) {
            0 => format!("Department of {dep}, University of {city}"),
            1 => format!("Institute for {dep} Research, {city}"),
            _ => format!("Faculty of {dep}, {city} University"),
        }
    }

    pub fn address<R: Rng>(&self, r: &mut R) -> String {
        format!(
            "{} {}, {} {}, {}",
            pick(r, STREETS),
            r.gen_range(1..120),
            r.gen_range(10000..99999),
            pick(r, CITIES),
            pick(r, COUNTRIES)
        )
    }

    fn email_for<R: Rng>(&self, r: &mut R, first: &str, last: &str) -> String {
        let host = mail_part(pick(r, CITIES));
        let tld = pick(r, &["de", "eu", "org", "edu", "nl", "it"]);
        format!("{}.{}@uni-{host}.{tld}", mail_part(first), mail_part(last))
    }

    /// Filler text for `Other` slots.
    pub fn filler<R: Rng>(&self, r: &mut R, kind: Filler, words: [usize; 2], record: &MetadataRecord) -> String {
        let n = r.gen_range(words[0]..=words[1].max(words[0]));
        match kind {
            Filler::Body => prose(r, BODY_WORDS, n),
            Filler::Heading => format!("1 {}", pick(r, HEADINGS)),
            Filler::AbstractHeading => "Abstract".to_string(),
            Filler::Keywords => {
                let kws: Vec<String> = (0..n.max(1)).map(|_| pick(r, TITLE_NOUN).to_lowercase()).collect();
                format!("Keywords: {}", kws.join(", "))
            }
            Filler::Footnote => {
                let year = record
                    .date
                    .as_deref()
                    .and_then(|d| d.split(' ').last())
                    .unwrap_or("2020")
                    .to_string();
                let text = pick(r, FOOTNOTES);
                let mut ws: Vec<&str> = text.split(' ').collect();
                ws.truncate(n.max(4));
                format!("© {year} {}", ws.join(" "))
            }
        }
    }
}

/// A full record (all nine fields), deterministic in `seed`.
pub fn sample_metadata(sampler: &FieldSampler, seed: u64) -> MetadataRecord {
    let mut r = rng(seed);
    let names = sampler.names(&mut r);
    let authors = match names.len() {
        1 => format!("{} {}", names[0].0, names[0].1),
        _ => {
            let mut parts: Vec<String> = names.iter().map(|(f, l)| format!("{f} {l}")).collect();
            let last = parts.pop().unwrap();
            format!("{} and {last}", parts.join(", "))
        }
    };
    let mut m = MetadataRecord::default();
    m.set(Label::Title, Some(sampler.title(&mut r)));
    m.set(Label::Authors, Some(authors));
    m.set(Label::Abstract, Some(sampler.abstract_text(&mut r)));
    m.set(Label::Journal, Some(sampler.journal(&mut r)));
    m.set(Label::Date, Some(sampler.date(&mut r)));
    m.set(Label::Doi, Some(sampler.doi(&mut r)));
    m.set(Label::Affiliation, Some(sampler.affiliation(&mut r)));
    m.set(Label::Address, Some(sampler.address(&mut r)));
    let email = sampler.email_for(&mut r, &names[0].0, &names[0].1);
    m.set(Label::Email, Some(email));
    m
}
