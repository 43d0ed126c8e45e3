//! One span per line: `doc_id sent_index start end`, with `start`
//! inclusive and `end` exclusive. Blank lines and `#` comments are
//! skipped.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::ConceptSpan;
use crate::corpus::AnnotatedCorpus;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpanRecord {
    pub doc_id: String,
    pub sent_index: usize,
    pub span: ConceptSpan,
}

#[derive(Debug, Error)]
pub enum SpanListError {
    #[error("line {line}: expected `doc_id sent_index start end`")]
    Syntax { line: usize },
    #[error("line {line}: empty span [{start},{end})")]
    Empty { line: usize, start: usize, end: usize },
    #[error("line {line}: {source}")]
    Io { line: usize, source: io::Error },
}

/// Writes the spans of every sentence, `spans[i]` belonging to
/// `corpus.sentences[i]`.
pub fn write_span_list<W: Write>(corpus: &AnnotatedCorpus, spans: &[Vec<ConceptSpan>], mut out: W) -> io::Result<()> {
    for (sentence, list) in corpus.sentences.iter().zip(spans) {
        for s in list {
            writeln!(out, "{} {} {} {}", sentence.doc_id, sentence.sent_index, s.start, s.end)?;
        }
    }
    Ok(())
}

fn record(cols: &[&str]) -> Option<(String, usize, usize, usize)> {
    match cols {
        [doc, sent, start, end] => Some((doc.to_string(), sent.parse().ok()?, start.parse().ok()?, end.parse().ok()?)),
        _ => None,
    }
}

/// True when every content line parses as a span record and there is at
/// least one. Corpus lines never do, since their third column is a tag.
pub fn looks_like_span_list(text: &str) -> bool {
    let mut any = false;
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if record(&cols).is_none() {
            return false;
        }
        any = true;
    }
    any
}

pub fn parse_span_list<R: BufRead>(reader: R) -> Result<Vec<SpanRecord>, SpanListError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| SpanListError::Io { line: line_no, source })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        let (doc_id, sent_index, start, end) = record(&cols).ok_or(SpanListError::Syntax { line: line_no })?;
        if start >= end {
            return Err(SpanListError::Empty { line: line_no, start, end });
        }
        out.push(SpanRecord {
            doc_id,
            sent_index,
            span: ConceptSpan::new(start, end),
        });
    }
    Ok(out)
}
