use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::records::{
    AuthorSlot, CallPart, CallRecord, MasterRecord, PublicationRecord, SourceAuthorProfile,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Format> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default();
        ext.parse()
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// A record that failed validation, kept for the rejects report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub original: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Reject>,
}

impl<T> Default for Ingested<T> {
    fn default() -> Self {
        Ingested {
            records: Vec::new(),
            rejects: Vec::new(),
        }
    }
}

impl<T> Ingested<T> {
    fn reject(&mut self, line: usize, original: impl Into<String>, reason: impl Into<String>) {
        self.rejects.push(Reject {
            line,
            original: original.into(),
            reason: reason.into(),
        });
    }
}

/// One parsed row: its 1-based line number, original text and parse outcome.
type RawRow<T> = (usize, String, std::result::Result<T, String>);

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<RawRow<T>>> {
    let reader = BufReader::new(open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<T>(&line).map_err(|e| format!("malformed record: {e}"));
        rows.push((idx + 1, line, parsed));
    }
    Ok(rows)
}

fn read_csv<T>(
    path: &Path,
    convert: impl Fn(&BTreeMap<String, String>) -> std::result::Result<T, String>,
) -> Result<Vec<RawRow<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(open(path)?);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(csv_error(path, e)),
                _ => {
                    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                    rows.push((line, String::new(), Err(format!("malformed record: {e}"))));
                    continue;
                }
            },
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let original = csv_line(&record);
        let fields: BTreeMap<String, String> = headers
            .iter()
            .cloned()
            .zip(record.iter().map(str::to_string))
            .collect();
        rows.push((line, original, convert(&fields)));
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("{other:?}"),
        },
    }
}

fn csv_line(record: &csv::StringRecord) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let _ = writer.write_record(record);
    let bytes = writer.into_inner().unwrap_or_default();
    String::from_utf8_lossy(&bytes).trim_end().to_string()
}

fn field<'a>(fields: &'a BTreeMap<String, String>, key: &str) -> &'a str {
    fields.get(key).map(|s| s.trim()).unwrap_or("")
}

fn opt_field(fields: &BTreeMap<String, String>, key: &str) -> Option<String> {
    let v = field(fields, key);
    (!v.is_empty()).then(|| v.to_string())
}

fn list_field(fields: &BTreeMap<String, String>, key: &str) -> Vec<String> {
    field(fields, key)
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn clean_opt(v: Option<String>) -> Option<String> {
    v.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

fn clean_email(e: &str) -> String {
    e.trim().to_lowercase()
}

fn publication_from_csv(fields: &BTreeMap<String, String>) -> std::result::Result<PublicationRecord, String> {
    let year = field(fields, "year")
        .parse::<i32>()
        .map_err(|e| format!("malformed record: year: {e}"))?;
    let authors_raw = field(fields, "authors");
    let authors: Vec<AuthorSlot> = if authors_raw.is_empty() {
        Vec::new()
    } else {
        serde_json::from_str(authors_raw).map_err(|e| format!("malformed record: authors: {e}"))?
    };
    Ok(PublicationRecord {
        pub_id: field(fields, "pub_id").to_string(),
        doi: opt_field(fields, "doi"),
        title: fields.get("title").cloned().unwrap_or_default(),
        abstract_text: opt_field(fields, "abstract"),
        keywords: list_field(fields, "keywords"),
        topics: list_field(fields, "topics"),
        year,
        authors,
        source_tags: list_field(fields, "source_tags"),
    })
}

fn canonical_publication(mut p: PublicationRecord) -> PublicationRecord {
    p.pub_id = p.pub_id.trim().to_string();
    p.doi = clean_opt(p.doi);
    p.abstract_text = clean_opt(p.abstract_text);
    p.authors.sort_by_key(|a| a.position);
    for a in &mut p.authors {
        a.source_author_id = a.source_author_id.trim().to_string();
    }
    p
}

/// Reads publications, routing every record that breaks an invariant to the rejects list.
pub fn ingest_publications(
    path: &Path,
    format: Format,
    reference_year: i32,
) -> Result<Ingested<PublicationRecord>> {
    let rows = match format {
        Format::Jsonl => read_jsonl::<PublicationRecord>(path)?,
        Format::Csv => read_csv(path, publication_from_csv)?,
    };
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (line, original, parsed) in rows {
        let record = match parsed {
            Ok(r) => canonical_publication(r),
            Err(reason) => {
                out.reject(line, original, reason);
                continue;
            }
        };
        if let Err(reason) = record.validate(reference_year) {
            out.reject(line, original, reason);
            continue;
        }
        if !seen.insert(record.pub_id.clone()) {
            out.reject(line, original, format!("duplicate pub_id `{}`", record.pub_id));
            continue;
        }
        out.records.push(record);
    }
    Ok(out)
}

fn call_from_csv(fields: &BTreeMap<String, String>) -> std::result::Result<CallRecord, String> {
    let parts_raw = field(fields, "parts");
    let description_parts: Vec<CallPart> = if parts_raw.is_empty() {
        Vec::new()
    } else {
        serde_json::from_str(parts_raw).map_err(|e| format!("malformed record: parts: {e}"))?
    };
    Ok(CallRecord {
        call_id: field(fields, "call_id").to_string(),
        title: fields.get("title").cloned().unwrap_or_default(),
        description_parts,
        classification_terms: list_field(fields, "terms"),
    })
}

pub fn ingest_calls(path: &Path, format: Format) -> Result<Ingested<CallRecord>> {
    let rows = match format {
        Format::Jsonl => read_jsonl::<CallRecord>(path)?,
        Format::Csv => read_csv(path, call_from_csv)?,
    };
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (line, original, parsed) in rows {
        let mut record = match parsed {
            Ok(r) => r,
            Err(reason) => {
                out.reject(line, original, reason);
                continue;
            }
        };
        record.call_id = record.call_id.trim().to_string();
        if let Err(reason) = record.validate() {
            out.reject(line, original, reason);
            continue;
        }
        if !seen.insert(record.call_id.clone()) {
            out.reject(line, original, format!("duplicate call_id `{}`", record.call_id));
            continue;
        }
        out.records.push(record);
    }
    Ok(out)
}

fn master_from_csv(fields: &BTreeMap<String, String>) -> std::result::Result<MasterRecord, String> {
    Ok(MasterRecord {
        researcher_key: field(fields, "researcher_key").to_string(),
        verified_source_ids: list_field(fields, "source_ids").into_iter().collect(),
        orcid: opt_field(fields, "orcid"),
        email: opt_field(fields, "email"),
        canonical_name: field(fields, "name").to_string(),
    })
}

/// Reads the master list. A repeated `researcher_key` is fatal; other violations are rejects.
pub fn ingest_master_list(path: &Path, format: Format) -> Result<Ingested<MasterRecord>> {
    let rows = match format {
        Format::Jsonl => read_jsonl::<MasterRecord>(path)?,
        Format::Csv => read_csv(path, master_from_csv)?,
    };
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (line, original, parsed) in rows {
        let mut record = match parsed {
            Ok(r) => r,
            Err(reason) => {
                out.reject(line, original, reason);
                continue;
            }
        };
        record.researcher_key = record.researcher_key.trim().to_string();
        record.verified_source_ids = record
            .verified_source_ids
            .iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        record.orcid = clean_opt(record.orcid);
        record.email = clean_opt(record.email).map(|e| clean_email(&e));
        record.canonical_name = record.canonical_name.trim().to_string();
        if record.researcher_key.is_empty() {
            out.reject(line, original, "empty researcher_key");
            continue;
        }
        if record.verified_source_ids.is_empty()
            && record.orcid.is_none()
            && record.email.is_none()
            && record.canonical_name.is_empty()
        {
            out.reject(line, original, "no identifier (source id, orcid, email or name)");
            continue;
        }
        if !seen.insert(record.researcher_key.clone()) {
            return Err(Error::DuplicateResearcherKey(record.researcher_key));
        }
        out.records.push(record);
    }
    Ok(out)
}

pub fn ingest_author_profiles(path: &Path) -> Result<Ingested<SourceAuthorProfile>> {
    let rows = read_jsonl::<SourceAuthorProfile>(path)?;
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (line, original, parsed) in rows {
        let mut record = match parsed {
            Ok(r) => r,
            Err(reason) => {
                out.reject(line, original, reason);
                continue;
            }
        };
        record.source_author_id = record.source_author_id.trim().to_string();
        record.orcid = clean_opt(record.orcid);
        record.emails = record
            .emails
            .iter()
            .map(|e| clean_email(e))
            .filter(|e| !e.is_empty())
            .collect();
        if record.source_author_id.is_empty() {
            out.reject(line, original, "empty source_author_id");
            continue;
        }
        if !seen.insert(record.source_author_id.clone()) {
            out.reject(
                line,
                original,
                format!("duplicate source_author_id `{}`", record.source_author_id),
            );
            continue;
        }
        out.records.push(record);
    }
    Ok(out)
}

/// Adds the mapped topic to every publication whose DOI appears in the `doi,topic` file.
/// Returns how many publications changed.
pub fn enrich_topics(pubs: &mut [PublicationRecord], topic_map_path: &Path) -> Result<usize> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(topic_map_path)?);
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (idx, row) in reader.deserialize::<TopicRow>().enumerate() {
        let row = row.map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(topic_map_path, io),
            other => Error::Parse {
                path: topic_map_path.to_path_buf(),
                line: idx + 2,
                message: format!("{other:?}"),
            },
        })?;
        let doi = row.doi.trim().to_lowercase();
        let topic = row.topic.trim().to_string();
        if !doi.is_empty() && !topic.is_empty() {
            map.entry(doi).or_default().push(topic);
        }
    }
    let mut modified = 0;
    for p in pubs.iter_mut() {
        let Some(topics) = p.doi.as_deref().and_then(|d| map.get(&d.trim().to_lowercase())) else {
            continue;
        };
        let mut changed = false;
        for t in topics {
            if !p.topics.iter().any(|x| x.eq_ignore_ascii_case(t)) {
                p.topics.push(t.clone());
                changed = true;
            }
        }
        if changed {
            modified += 1;
        }
    }
    Ok(modified)
}

#[derive(Deserialize)]
struct TopicRow {
    doi: String,
    topic: String,
}

/// Writes one JSON object per line in the given order.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a JSONL file of trusted (engine-written) rows; any malformed line is fatal.
pub fn read_jsonl_strict<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl::<T>(path)?
        .into_iter()
        .map(|(line, _, parsed)| {
            parsed.map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            })
        })
        .collect()
}
