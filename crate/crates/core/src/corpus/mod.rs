//! Corpus loading, two-level chunking and passage cleaning.

mod clean;
mod company;
mod segment;

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{clean_passages, CleanOutcome, CleaningReport, CleaningRules, DroppedPassage};
pub use company::{extract_company, CompanyPatterns};
pub use segment::{
    chunk_document, segment_passages, segment_sentences, DEFAULT_PASSAGE_MAX_LEN,
    DEFAULT_SENTENCE_MAX_LEN,
};

use crate::text::normalize_text;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub title: String,
    pub text: String,
    #[serde(rename = "date")]
    pub publish_date: NaiveDate,
    #[serde(default)]
    pub report_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub company: Option<String>,
    /// Position in the loaded corpus; fixes output order.
    #[serde(default)]
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceChunk {
    pub sentence_id: String,
    pub ordinal: usize,
    pub text: String,
    pub char_len: usize,
    /// A single sentence longer than the sentence limit.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unsplittable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageChunk {
    pub passage_id: String,
    pub doc_id: String,
    pub doc_ordinal: usize,
    pub ordinal: usize,
    pub text: String,
    pub char_len: usize,
    #[serde(default)]
    pub sentences: Vec<SentenceChunk>,
}

impl PassageChunk {
    pub fn sort_key(&self) -> (usize, usize) {
        (self.doc_ordinal, self.ordinal)
    }
}

pub fn passage_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}-p{ordinal}")
}

pub fn sentence_id(passage_id: &str, ordinal: usize) -> String {
    format!("{passage_id}-s{ordinal}")
}

/// A non-fatal problem met while loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub line: usize,
    pub doc_id: String,
    pub kind: String,
}

#[derive(Debug, Default)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    title: String,
    text: String,
    date: String,
    #[serde(default)]
    report_type: String,
    #[serde(default)]
    company: Option<String>,
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    // accept a bare date or the date prefix of a timestamp
    let head = raw.get(..10).unwrap_or(raw);
    NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()
}

/// Parses JSONL from any reader. Blank lines are skipped; duplicate ids keep
/// the first occurrence and record a warning for the rest.
pub fn parse_corpus(reader: impl BufRead) -> Result<LoadedCorpus, IngestError> {
    let mut out = LoadedCorpus::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let text = normalize_text(&raw.text);
        if text.is_empty() {
            return Err(IngestError::Parse {
                line: line_no,
                message: format!("document {:?} has empty text", raw.id),
            });
        }
        let publish_date = parse_date(&raw.date).ok_or_else(|| IngestError::Parse {
            line: line_no,
            message: format!("unparseable date {:?}", raw.date),
        })?;
        if !seen.insert(raw.id.clone()) {
            log::warn!("line {line_no}: duplicate document id {:?} ignored", raw.id);
            out.warnings.push(IngestWarning {
                line: line_no,
                doc_id: raw.id,
                kind: "duplicate_id".into(),
            });
            continue;
        }
        let ordinal = out.documents.len();
        out.documents.push(Document {
            doc_id: raw.id,
            title: raw.title.trim().to_string(),
            text,
            publish_date,
            report_type: raw.report_type,
            company: raw.company.filter(|c| !c.trim().is_empty()),
            ordinal,
        });
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<LoadedCorpus, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str) -> String {
        format!(
            r#"{{"id":"{id}","title":"标题","text":"正文内容。","date":"2023-05-01","report_type":"company"}}"#
        )
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let c = parse_corpus("".as_bytes()).unwrap();
        assert!(c.documents.is_empty());
    }

    #[test]
    fn two_lines_in_order() {
        let src = format!("{}\n{}\n", line("a"), line("b"));
        let c = parse_corpus(src.as_bytes()).unwrap();
        let ids: Vec<_> = c.documents.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(c.documents[1].ordinal, 1);
    }

    #[test]
    fn missing_text_names_line_three() {
        let bad = r#"{"id":"c","title":"t","date":"2023-01-01","report_type":"x"}"#;
        let src = format!("{}\n{}\n{bad}\n", line("a"), line("b"));
        match parse_corpus(src.as_bytes()) {
            Err(IngestError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("text"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_keep_first_and_warn() {
        let src = format!("{}\n{}\n", line("a"), line("a"));
        let c = parse_corpus(src.as_bytes()).unwrap();
        assert_eq!(c.documents.len(), 1);
        assert_eq!(c.warnings.len(), 1);
        assert_eq!(c.warnings[0].line, 2);
    }

    #[test]
    fn whitespace_only_text_rejected() {
        let src = r#"{"id":"a","title":"t","text":" \r\n ","date":"2023-01-01"}"#;
        assert!(matches!(
            parse_corpus(src.as_bytes()),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn timestamp_dates_accepted() {
        let src = r#"{"id":"a","title":"t","text":"x","date":"2023-01-02T09:30:00+08:00"}"#;
        let c = parse_corpus(src.as_bytes()).unwrap();
        assert_eq!(c.documents[0].publish_date, NaiveDate::from_ymd_opt(2023, 1, 2).unwrap());
    }

    #[test]
    fn bad_date_rejected() {
        let src = r#"{"id":"a","title":"t","text":"x","date":"May 1"}"#;
        assert!(parse_corpus(src.as_bytes()).is_err());
    }
}
