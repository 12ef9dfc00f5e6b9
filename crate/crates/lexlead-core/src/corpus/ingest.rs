//! Line-delimited article ingestion.
//!
//! One JSON record per line with fields `id`, `source`, `date` (ISO-8601
//! `YYYY-MM-DD`) and `text`. Malformed lines are skipped and reported with
//! their line number; an unreadable file is fatal.

use crate::error::{Error, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// One raw article as found in the input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawArticle {
    pub id: String,
    pub source: String,
    pub date: NaiveDate,
    pub text: String,
}

/// Wire form of [`RawArticle`]; the date is kept textual so the parse error
/// can name the offending value.
#[derive(Debug, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub id: String,
    pub source: String,
    pub date: String,
    pub text: String,
}

impl RawArticle {
    pub fn to_record(&self) -> ArticleRecord {
        ArticleRecord {
            id: self.id.clone(),
            source: self.source.clone(),
            date: self.date.format("%Y-%m-%d").to_string(),
            text: self.text.clone(),
        }
    }
}

/// A skipped input line and the reason it was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Read every well-formed record from `path`, in file order.
pub fn ingest(path: &Path) -> Result<(Vec<RawArticle>, Vec<IngestWarning>)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    ingest_reader(BufReader::new(file))
}

/// Same as [`ingest`] but over any reader (used by tests and the synthetic
/// generator round-trip).
pub fn ingest_reader<R: Read>(reader: BufReader<R>) -> Result<(Vec<RawArticle>, Vec<IngestWarning>)> {
    let mut articles = Vec::new();
    let mut warnings = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(format!("<input line {lineno}>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ArticleRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                warnings.push(IngestWarning {
                    line: lineno,
                    message: format!("record skipped: {e}"),
                });
                continue;
            }
        };
        let date = match NaiveDate::parse_from_str(&record.date, "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => {
                warnings.push(IngestWarning {
                    line: lineno,
                    message: format!("record skipped: bad date {:?}", record.date),
                });
                continue;
            }
        };
        if !seen_ids.insert(record.id.clone()) {
            warnings.push(IngestWarning {
                line: lineno,
                message: format!("record skipped: duplicate id {:?}", record.id),
            });
            continue;
        }
        articles.push(RawArticle {
            id: record.id,
            source: record.source,
            date,
            text: record.text,
        });
    }
    Ok((articles, warnings))
}
