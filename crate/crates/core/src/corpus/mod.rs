//! Post ingestion, the cleaning pipeline and the JSONL corpus store.

mod pipeline;
mod shuffle;

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::TermHit;

pub use pipeline::{
    clean_pipeline, dedup_latest, drop_non_text, is_url, CleanResources, PipelineConfig, PipelineReport, StepCount,
};
pub use shuffle::{constrained_shuffle, ShuffleOutcome};

pub const REQUIRED_COLUMNS: [&str; 8] =
    ["post_id", "source_id", "source_name", "created_at", "fetched_at", "text", "url", "interactions"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    FileUnwritable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("header is missing columns: {}", missing.join(", "))]
    HeaderMismatch { missing: Vec<String> },
    #[error("corpus store line {line}: {reason}")]
    BadStoreLine { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPost {
    pub post_id: String,
    pub source_id: String,
    pub source_name: String,
    pub created_at: Option<DateTime<Utc>>,
    pub fetched_at: Option<DateTime<Utc>>,
    pub text: String,
    pub url: Option<String>,
    pub interactions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanPost {
    pub post_id: String,
    pub source_id: String,
    pub text: String,
    pub was_zawgyi: bool,
    pub syllable_count: usize,
    pub tokens: Vec<String>,
    pub lexicon_hits: Vec<TermHit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRow {
    /// 1-based line number in the file, header included.
    pub row: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub posts: usize,
    pub skipped: Vec<SkippedRow>,
}

/// Source of raw posts. Only the CSV export reader ships; a live API client
/// would implement the same trait.
pub trait Fetcher {
    fn fetch(&mut self) -> Result<(Vec<RawPost>, IngestReport), CorpusError>;
}

#[derive(Debug, Clone)]
pub struct CsvFileFetcher {
    pub path: PathBuf,
}

impl Fetcher for CsvFileFetcher {
    fn fetch(&mut self) -> Result<(Vec<RawPost>, IngestReport), CorpusError> {
        ingest(&self.path)
    }
}

pub fn parse_timestamp(s: &str) -> Result<Option<DateTime<Utc>>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(Some(t.with_timezone(&Utc)));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(Some(t.and_utc()));
        }
    }
    Err(format!("bad timestamp {s:?}"))
}

pub fn ingest(path: impl AsRef<Path>) -> Result<(Vec<RawPost>, IngestReport), CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| CorpusError::FileUnreadable { path: path.display().to_string(), source: e })?;
    ingest_reader(file).map_err(|e| match e {
        CorpusError::FileUnreadable { source, .. } => {
            CorpusError::FileUnreadable { path: path.display().to_string(), source }
        }
        other => other,
    })
}

pub fn ingest_reader(reader: impl std::io::Read) -> Result<(Vec<RawPost>, IngestReport), CorpusError> {
    let unreadable = |e: csv::Error| CorpusError::FileUnreadable {
        path: String::new(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(unreadable)?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().trim_start_matches('\u{FEFF}') == name);
    let missing: Vec<String> = REQUIRED_COLUMNS.iter().filter(|c| col(c).is_none()).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(CorpusError::HeaderMismatch { missing });
    }
    let idx: Vec<usize> = REQUIRED_COLUMNS.iter().map(|c| col(c).unwrap()).collect();
    let mut posts = Vec::new();
    let mut report = IngestReport::default();
    for rec in rdr.records() {
        report.rows += 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map_or(0, |p| p.line());
                report.skipped.push(SkippedRow { row, reason: e.to_string() });
                continue;
            }
        };
        let row = rec.position().map_or(0, |p| p.line());
        match parse_row(&rec, &idx) {
            Ok(p) => posts.push(p),
            Err(reason) => report.skipped.push(SkippedRow { row, reason }),
        }
    }
    report.posts = posts.len();
    Ok((posts, report))
}

fn parse_row(rec: &csv::StringRecord, idx: &[usize]) -> Result<RawPost, String> {
    let get = |i: usize| rec.get(idx[i]).ok_or_else(|| format!("missing column {}", REQUIRED_COLUMNS[i]));
    let post_id = get(0)?.trim().to_string();
    if post_id.is_empty() {
        return Err("empty post_id".into());
    }
    let created_at = parse_timestamp(get(3)?)?;
    let fetched_at = parse_timestamp(get(4)?)?;
    if let (Some(c), Some(f)) = (created_at, fetched_at) {
        if f < c {
            return Err("fetched_at precedes created_at".into());
        }
    }
    let url = Some(get(6)?.trim().to_string()).filter(|u| !u.is_empty());
    let inter = get(7)?.trim();
    let interactions = if inter.is_empty() { 0 } else { inter.parse().map_err(|_| format!("bad interactions {inter:?}"))? };
    Ok(RawPost {
        post_id,
        source_id: get(1)?.trim().to_string(),
        source_name: get(2)?.to_string(),
        created_at,
        fetched_at,
        text: get(5)?.to_string(),
        url,
        interactions,
    })
}

/// Writes posts back out in the input CSV layout.
pub fn write_raw_csv(path: impl AsRef<Path>, posts: &[RawPost]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let fail = |e: std::io::Error| CorpusError::FileUnwritable { path: path.display().to_string(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(|e| fail(e.into()))?;
    w.write_record(REQUIRED_COLUMNS).map_err(|e| fail(e.into()))?;
    let ts = |t: &Option<DateTime<Utc>>| t.map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)).unwrap_or_default();
    for p in posts {
        w.write_record([
            p.post_id.as_str(),
            &p.source_id,
            &p.source_name,
            &ts(&p.created_at),
            &ts(&p.fetched_at),
            &p.text,
            p.url.as_deref().unwrap_or(""),
            &p.interactions.to_string(),
        ])
        .map_err(|e| fail(e.into()))?;
    }
    w.flush().map_err(fail)
}

pub fn write_jsonl(path: impl AsRef<Path>, posts: &[CleanPost]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let fail = |e: std::io::Error| CorpusError::FileUnwritable { path: path.display().to_string(), source: e };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(fail)?);
    for p in posts {
        serde_json::to_writer(&mut w, p).map_err(|e| fail(e.into()))?;
        w.write_all(b"\n").map_err(fail)?;
    }
    w.flush().map_err(fail)
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<CleanPost>, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| CorpusError::FileUnreadable { path: path.display().to_string(), source: e })?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::FileUnreadable { path: path.display().to_string(), source: e })?;
        if line.trim().is_empty() {
            continue;
        }
        let post = serde_json::from_str(&line).map_err(|e| CorpusError::BadStoreLine { line: i + 1, reason: e.to_string() })?;
        out.push(post);
    }
    Ok(out)
}
