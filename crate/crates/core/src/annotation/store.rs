use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{AnnotationError, Decision, LabelRecord};
use crate::corpus::parse_timestamp;

pub const LABEL_COLUMNS: [&str; 6] = ["post_id", "annotator_id", "round", "decision", "characteristics", "timestamp"];
const ADJUDICATION_COLUMNS: [&str; 4] = ["post_id", "decision", "facilitator_id", "timestamp"];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> AnnotationError + '_ {
    move |e| AnnotationError::Io { path: path.display().to_string(), source: e }
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Writes to a sibling temp file, syncs, then renames over `path`.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), AnnotationError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let err = io_err(path);
    let mut f = std::fs::File::create(&tmp).map_err(&err)?;
    f.write_all(bytes).map_err(&err)?;
    f.sync_all().map_err(&err)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(err)
}

fn labels_csv(records: &[LabelRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LABEL_COLUMNS).expect("in-memory write");
    for r in records {
        w.write_record([
            r.post_id.as_str(),
            &r.annotator_id,
            &r.round.to_string(),
            &r.decision.to_string(),
            &r.characteristics.join(";"),
            &ts(&r.timestamp),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_labels(path: impl AsRef<Path>, records: &[LabelRecord]) -> Result<(), AnnotationError> {
    atomic_write(path.as_ref(), &labels_csv(records))
}

fn read_table(
    path: &Path,
    columns: &[&str],
) -> Result<Vec<(usize, Vec<String>)>, AnnotationError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let bad = |line: usize, reason: String| AnnotationError::BadLabelRow { line, reason };
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| headers.iter().position(|h| h.trim().trim_start_matches('\u{FEFF}') == *c).ok_or_else(|| bad(1, format!("missing column {c}"))))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row = idx
            .iter()
            .map(|&i| rec.get(i).map(str::to_string).ok_or_else(|| bad(line, "short row".into())))
            .collect::<Result<Vec<_>, _>>()?;
        out.push((line, row));
    }
    Ok(out)
}

fn parse_time(line: usize, s: &str) -> Result<DateTime<Utc>, AnnotationError> {
    match parse_timestamp(s) {
        Ok(Some(t)) => Ok(t),
        Ok(None) => Err(AnnotationError::BadLabelRow { line, reason: "missing timestamp".into() }),
        Err(reason) => Err(AnnotationError::BadLabelRow { line, reason }),
    }
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>, AnnotationError> {
    let path = path.as_ref();
    read_table(path, &LABEL_COLUMNS)?
        .into_iter()
        .map(|(line, row)| {
            let bad = |reason: String| AnnotationError::BadLabelRow { line, reason };
            let round = row[2].trim().parse().map_err(|_| bad(format!("bad round {:?}", row[2])))?;
            let decision: Decision = row[3].parse().map_err(bad)?;
            let characteristics =
                row[4].split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
            Ok(LabelRecord {
                post_id: row[0].trim().to_string(),
                annotator_id: row[1].trim().to_string(),
                round,
                decision,
                characteristics,
                timestamp: parse_time(line, &row[5])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    pub action: String,
    pub post_id: String,
    pub actor: String,
    pub before: Option<String>,
    pub after: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjudication {
    pub post_id: String,
    pub decision: Decision,
    pub facilitator_id: String,
    pub timestamp: DateTime<Utc>,
}

fn describe(r: &LabelRecord) -> String {
    if r.characteristics.is_empty() {
        r.decision.to_string()
    } else {
        format!("{} [{}]", r.decision, r.characteristics.join(";"))
    }
}

/// Single mutation point for labels. Each change is written through to the
/// labels CSV by atomic replace; overwrites and adjudications are appended to
/// an audit log next to it.
#[derive(Debug, Clone)]
pub struct LabelStore {
    path: PathBuf,
    records: Vec<LabelRecord>,
    index: HashMap<(String, String), usize>,
    adjudications: BTreeMap<String, Adjudication>,
}

impl LabelStore {
    /// Loads `path` if present; otherwise starts empty and creates it.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, AnnotationError> {
        let path = path.into();
        let records = if path.exists() { read_labels(&path)? } else { Vec::new() };
        let mut store = LabelStore { path, records: Vec::new(), index: HashMap::new(), adjudications: BTreeMap::new() };
        for r in records {
            store.upsert(r);
        }
        let adj = store.adjudications_path();
        if adj.exists() {
            for (line, row) in read_table(&adj, &ADJUDICATION_COLUMNS)? {
                let decision: Decision =
                    row[1].parse().map_err(|reason| AnnotationError::BadLabelRow { line, reason })?;
                let a = Adjudication {
                    post_id: row[0].clone(),
                    decision,
                    facilitator_id: row[2].clone(),
                    timestamp: parse_time(line, &row[3])?,
                };
                store.adjudications.insert(a.post_id.clone(), a);
            }
        }
        if !store.path.exists() {
            store.flush()?;
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn audit_path(&self) -> PathBuf {
        self.sibling("audit.jsonl")
    }

    pub fn adjudications_path(&self) -> PathBuf {
        self.sibling("adjudications.csv")
    }

    fn sibling(&self, suffix: &str) -> PathBuf {
        let stem = self.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.path.with_file_name(format!("{stem}.{suffix}"))
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn get(&self, post_id: &str, annotator_id: &str) -> Option<&LabelRecord> {
        self.index.get(&(post_id.to_string(), annotator_id.to_string())).map(|&i| &self.records[i])
    }

    pub fn by_annotator<'a>(&'a self, annotator_id: &'a str) -> impl Iterator<Item = &'a LabelRecord> + 'a {
        self.records.iter().filter(move |r| r.annotator_id == annotator_id)
    }

    pub fn adjudications(&self) -> BTreeMap<String, Decision> {
        self.adjudications.iter().map(|(k, a)| (k.clone(), a.decision)).collect()
    }

    fn upsert(&mut self, r: LabelRecord) -> Option<LabelRecord> {
        let key = (r.post_id.clone(), r.annotator_id.clone());
        match self.index.get(&key) {
            Some(&i) => Some(std::mem::replace(&mut self.records[i], r)),
            None => {
                self.index.insert(key, self.records.len());
                self.records.push(r);
                None
            }
        }
    }

    fn flush(&self) -> Result<(), AnnotationError> {
        write_labels(&self.path, &self.records)
    }

    fn audit(&self, entry: &AuditEntry) -> Result<(), AnnotationError> {
        let path = self.audit_path();
        let err = io_err(&path);
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path).map_err(&err)?;
        let mut line = serde_json::to_string(entry).expect("audit entry serializes");
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(err)
    }

    /// Stores a label, replacing any earlier one for the same post and
    /// annotator. Returns the replaced record.
    pub fn submit(&mut self, record: LabelRecord) -> Result<Option<LabelRecord>, AnnotationError> {
        let after = describe(&record);
        let (post, actor, at) = (record.post_id.clone(), record.annotator_id.clone(), record.timestamp);
        let previous = self.upsert(record);
        if let Err(e) = self.flush() {
            // keep memory equal to disk
            match &previous {
                Some(p) => {
                    self.upsert(p.clone());
                }
                None => {
                    let i = self.index.remove(&(post.clone(), actor.clone())).expect("just inserted");
                    self.records.remove(i);
                    self.reindex();
                }
            }
            return Err(e);
        }
        if let Some(p) = &previous {
            self.audit(&AuditEntry {
                at,
                action: "overwrite".into(),
                post_id: post,
                actor,
                before: Some(describe(p)),
                after,
            })?;
        }
        Ok(previous)
    }

    fn reindex(&mut self) {
        self.index = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.post_id.clone(), r.annotator_id.clone()), i))
            .collect();
    }

    /// Records the facilitator's decision for a post.
    pub fn adjudicate(
        &mut self,
        post_id: &str,
        decision: Decision,
        facilitator_id: &str,
        at: DateTime<Utc>,
    ) -> Result<(), AnnotationError> {
        let before: Vec<String> = self
            .records
            .iter()
            .filter(|r| r.post_id == post_id)
            .map(|r| format!("{}={}", r.annotator_id, r.decision))
            .collect();
        let a = Adjudication {
            post_id: post_id.to_string(),
            decision,
            facilitator_id: facilitator_id.to_string(),
            timestamp: at,
        };
        let old = self.adjudications.insert(post_id.to_string(), a);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(ADJUDICATION_COLUMNS).expect("in-memory write");
        for a in self.adjudications.values() {
            w.write_record([a.post_id.as_str(), &a.decision.to_string(), &a.facilitator_id, &ts(&a.timestamp)])
                .expect("in-memory write");
        }
        if let Err(e) = atomic_write(&self.adjudications_path(), &w.into_inner().expect("in-memory flush")) {
            match old {
                Some(o) => self.adjudications.insert(post_id.to_string(), o),
                None => self.adjudications.remove(post_id),
            };
            return Err(e);
        }
        self.audit(&AuditEntry {
            at,
            action: "adjudicate".into(),
            post_id: post_id.to_string(),
            actor: facilitator_id.to_string(),
            before: Some(before.join(", ")),
            after: decision.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::tests::rec;

    #[test]
    fn csv_round_trip_and_overwrite_audit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let mut store = LabelStore::open(&path).unwrap();
        assert!(path.exists());
        store.submit(rec("p1", "a", Decision::Yes, &["race", "caste"])).unwrap();
        store.submit(rec("p2", "a", Decision::No, &[])).unwrap();
        let prev = store.submit(rec("p1", "a", Decision::No, &[])).unwrap();
        assert_eq!(prev.unwrap().decision, Decision::Yes);
        let on_disk = read_labels(&path).unwrap();
        assert_eq!(on_disk, store.records());
        assert_eq!(on_disk.len(), 2);
        let audit = std::fs::read_to_string(store.audit_path()).unwrap();
        assert_eq!(audit.lines().count(), 1);
        assert!(audit.contains("race;caste"));
        store.adjudicate("p1", Decision::Yes, "f", DateTime::from_timestamp(5, 0).unwrap()).unwrap();
        let reopened = LabelStore::open(&path).unwrap();
        assert_eq!(reopened.records(), store.records());
        assert_eq!(reopened.adjudications().get("p1"), Some(&Decision::Yes));
    }

    #[test]
    fn bad_rows_name_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        std::fs::write(&path, "post_id,annotator_id,round,decision,characteristics,timestamp\np,a,1,Maybe,,2021-01-01T00:00:00Z\n").unwrap();
        match read_labels(&path) {
            Err(AnnotationError::BadLabelRow { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
