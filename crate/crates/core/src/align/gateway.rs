//! DOI-keyed metadata lookup.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::MetadataRecord;

pub const TIMEOUT_ENV: &str = "METAFORGE_GATEWAY_TIMEOUT_MS";
const DEFAULT_TIMEOUT_MS: u64 = 10_000;

static DOI_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^10\.\d{4,9}/\S+$").unwrap());

pub fn is_valid_doi(doi: &str) -> bool {
    DOI_RE.is_match(doi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatewayRecord {
    pub doi: String,
    #[serde(default)]
    pub metadata: MetadataRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdf_url: Option<String>,
}

pub trait MetadataGateway: Send + Sync {
    fn lookup(&self, doi: &str) -> Result<GatewayRecord>;
}

/// Validates the DOI and queries the gateway.
pub fn fetch_metadata(doi: &str, gateway: &dyn MetadataGateway) -> Result<GatewayRecord> {
    if !is_valid_doi(doi) {
        return Err(Error::invalid(format!("not a DOI: {doi:?}")));
    }
    gateway.lookup(doi)
}

/// Records read from local JSON files; each file holds one record or an array.
#[derive(Clone, Debug, Default)]
pub struct FixtureGateway {
    records: BTreeMap<String, GatewayRecord>,
}

impl FixtureGateway {
    pub fn from_records(records: impl IntoIterator<Item = GatewayRecord>) -> Self {
        FixtureGateway {
            records: records.into_iter().map(|r| (r.doi.to_lowercase(), r)).collect(),
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut records = Vec::new();
        for p in paths {
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| Error::MalformedResponse(format!("{}: {e}", p.display())))?;
            let items = match value {
                Value::Array(items) => items,
                v => vec![v],
            };
            for item in items {
                let r: GatewayRecord = serde_json::from_value(item)
                    .map_err(|e| Error::MalformedResponse(format!("{}: {e}", p.display())))?;
                if r.doi.trim().is_empty() {
                    return Err(Error::MalformedResponse(format!("{}: empty doi", p.display())));
                }
                records.push(r);
            }
        }
        Ok(FixtureGateway::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes one `<n>.json` file per record.
    pub fn write_dir(records: &[GatewayRecord], dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, r) in records.iter().enumerate() {
            let p = dir.join(format!("{i:06}.json"));
            fs::write(&p, serde_json::to_string_pretty(r)?).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

impl MetadataGateway for FixtureGateway {
    fn lookup(&self, doi: &str) -> Result<GatewayRecord> {
        self.records
            .get(&doi.to_lowercase())
            .cloned()
            .ok_or_else(|| Error::NotFound(doi.to_string()))
    }
}

/// CrossRef-style REST gateway: `GET {base}/works/{doi}`.
pub struct HttpGateway {
    base: String,
    agent: ureq::Agent,
}

impl HttpGateway {
    pub fn new(base: impl Into<String>, timeout: Duration) -> Self {
        HttpGateway {
            base: base.into().trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Timeout from `METAFORGE_GATEWAY_TIMEOUT_MS`, default 10 s.
    pub fn from_env(base: impl Into<String>) -> Self {
        let ms = std::env::var(TIMEOUT_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_TIMEOUT_MS);
        HttpGateway::new(base, Duration::from_millis(ms))
    }
}

impl MetadataGateway for HttpGateway {
    fn lookup(&self, doi: &str) -> Result<GatewayRecord> {
        let url = format!("{}/works/{}", self.base, doi);
        let resp = match self.agent.get(&url).call() {
            Ok(r) => r,
            Err(ureq::Error::Status(404, _)) => return Err(Error::NotFound(doi.to_string())),
            Err(ureq::Error::Status(code, _)) => {
                return Err(Error::MalformedResponse(format!("{url}: HTTP {code}")))
            }
            Err(e) => return Err(Error::NetworkUnavailable(format!("{url}: {e}"))),
        };
        let body = resp
            .into_string()
            .map_err(|e| Error::NetworkUnavailable(format!("{url}: {e}")))?;
        parse_crossref(doi, &body)
    }
}

static TAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]+>").unwrap());

/// Maps a CrossRef `works` response onto a [`GatewayRecord`].
pub fn parse_crossref(doi: &str, body: &str) -> Result<GatewayRecord> {
    let malformed = |m: &str| Error::MalformedResponse(format!("{doi}: {m}"));
    let v: Value = serde_json::from_str(body).map_err(|e| malformed(&e.to_string()))?;
    let msg = v.get("message").ok_or_else(|| malformed("no message object"))?;
    let first_str = |key: &str| -> Option<String> {
        match msg.get(key)? {
            Value::Array(a) => a.first()?.as_str().map(str::to_string),
            Value::String(s) => Some(s.clone()),
            _ => None,
        }
    };
    let mut m = MetadataRecord::default();
    m.set(crate::Label::Title, first_str("title"));
    m.set(crate::Label::Journal, first_str("container-title"));
    m.set(
        crate::Label::Abstract,
        msg.get("abstract")
            .and_then(Value::as_str)
            .map(|s| super::normalize_text(&TAG_RE.replace_all(s, " "))),
    );
    if let Some(authors) = msg.get("author").and_then(Value::as_array) {
        let names: Vec<String> = authors
            .iter()
            .filter_map(|a| {
                let given = a.get("given").and_then(Value::as_str).unwrap_or("");
                let family = a.get("family").and_then(Value::as_str)?;
                Some(format!("{given} {family}").trim().to_string())
            })
            .collect();
        if !names.is_empty() {
            m.set(crate::Label::Authors, Some(names.join(", ")));
        }
        let affs: Vec<&str> = authors
            .iter()
            .filter_map(|a| a.get("affiliation")?.as_array())
            .flatten()
            .filter_map(|x| x.get("name")?.as_str())
            .collect();
        if let Some(first) = affs.first() {
            m.set(crate::Label::Affiliation, Some(first.to_string()));
        }
    }
    if let Some(parts) = msg
        .pointer("/issued/date-parts/0")
        .and_then(Value::as_array)
    {
        let nums: Vec<String> = parts
            .iter()
            .filter_map(Value::as_u64)
            .enumerate()
            .map(|(i, n)| if i == 0 { n.to_string() } else { format!("{n:02}") })
            .collect();
        if !nums.is_empty() {
            m.set(crate::Label::Date, Some(nums.join("-")));
        }
    }
    let record_doi = msg.get("DOI").and_then(Value::as_str).unwrap_or(doi).to_string();
    m.set(crate::Label::Doi, Some(record_doi.clone()));
    let pdf_url = msg.get("link").and_then(Value::as_array).and_then(|links| {
        links
            .iter()
            .find(|l| l.get("content-type").and_then(Value::as_str) == Some("application/pdf"))
            .or_else(|| links.first())
            .and_then(|l| l.get("URL")?.as_str().map(str::to_string))
    });
    Ok(GatewayRecord {
        doi: record_doi,
        metadata: m,
        pdf_url,
    })
}
