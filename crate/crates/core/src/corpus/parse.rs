use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use super::{normalize_token, AnnotatedCorpus, AnnotatedSentence, Label, RawToken};

const DOCSTART: &str = "-DOCSTART-";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: &'static str,
        found: usize,
    },
    #[error("line {line}: {source}")]
    Label {
        line: usize,
        source: super::UnknownLabel,
    },
    #[error("line {line}: {source}")]
    Io { line: usize, source: io::Error },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::ColumnCount { line, .. }
            | ParseError::Label { line, .. }
            | ParseError::Io { line, .. } => *line,
        }
    }
}

/// Whether the label column must be present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// `surface POS LABEL [CONCEPT_ID]`
    #[default]
    Required,
    /// Also accepts bare `surface POS` lines (labelled `O`), for tagging
    /// unannotated text.
    Optional,
}

fn default_doc_id(n: usize) -> String {
    format!("doc{n}")
}

struct Builder {
    corpus: AnnotatedCorpus,
    current: Vec<RawToken>,
    next_sent: usize,
}

impl Builder {
    fn open_document(&mut self, id: Option<&str>) {
        self.flush();
        let n = self.corpus.documents.len();
        self.corpus
            .documents
            .push(id.map_or_else(|| default_doc_id(n), str::to_string));
        self.next_sent = 0;
    }

    fn push(&mut self, token: RawToken) {
        if self.corpus.documents.is_empty() {
            self.open_document(None);
        }
        self.current.push(token);
    }

    fn flush(&mut self) {
        if self.current.is_empty() {
            return;
        }
        let doc_id = self.corpus.documents.last().cloned().unwrap_or_default();
        self.corpus.sentences.push(AnnotatedSentence {
            tokens: std::mem::take(&mut self.current),
            doc_id,
            sent_index: self.next_sent,
        });
        self.next_sent += 1;
    }
}

/// Parses the whitespace-separated column format. Blank lines end
/// sentences; a `-DOCSTART-` line (optionally followed by an id) starts a
/// new document.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<AnnotatedCorpus, ParseError> {
    parse_corpus_with(reader, LabelMode::Required)
}

pub fn parse_corpus_with<R: BufRead>(
    reader: R,
    mode: LabelMode,
) -> Result<AnnotatedCorpus, ParseError> {
    let mut b = Builder {
        corpus: AnnotatedCorpus::default(),
        current: Vec::new(),
        next_sent: 0,
    };
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| ParseError::Io {
            line: lineno,
            source,
        })?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            b.flush();
            continue;
        }
        if cols[0] == DOCSTART && cols.len() <= 2 {
            b.open_document(cols.get(1).copied());
            continue;
        }
        let min_cols = match mode {
            LabelMode::Required => 3,
            LabelMode::Optional => 2,
        };
        if cols.len() < min_cols || cols.len() > 4 {
            return Err(ParseError::ColumnCount {
                line: lineno,
                expected: if mode == LabelMode::Required {
                    "3 or 4"
                } else {
                    "2 to 4"
                },
                found: cols.len(),
            });
        }
        let label = match cols.get(2) {
            Some(s) => s.parse::<Label>().map_err(|source| ParseError::Label {
                line: lineno,
                source,
            })?,
            None => Label::O,
        };
        b.push(RawToken {
            surface: normalize_token(cols[0]),
            pos: cols[1].to_string(),
            label,
            concept_id: cols.get(3).map(|s| s.to_string()),
        });
    }
    b.flush();
    Ok(b.corpus)
}

pub fn read_corpus(path: impl AsRef<Path>, mode: LabelMode) -> Result<AnnotatedCorpus, ReadError> {
    let file = File::open(path.as_ref()).map_err(|source| ReadError::Open {
        path: path.as_ref().display().to_string(),
        source,
    })?;
    Ok(parse_corpus_with(BufReader::new(file), mode)?)
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Writes the canonical column form: tab-separated, one directive per
/// document, a blank line after every sentence.
pub fn write_corpus<W: Write>(corpus: &AnnotatedCorpus, mut out: W) -> io::Result<()> {
    for (n, doc) in corpus.documents.iter().enumerate() {
        if *doc == default_doc_id(n) {
            writeln!(out, "{DOCSTART}")?;
        } else {
            writeln!(out, "{DOCSTART} {doc}")?;
        }
        writeln!(out)?;
        for sentence in corpus.sentences.iter().filter(|s| &s.doc_id == doc) {
            for t in &sentence.tokens {
                write!(out, "{}\t{}\t{}", t.surface, t.pos, t.label)?;
                if let Some(c) = &t.concept_id {
                    write!(out, "\t{c}")?;
                }
                writeln!(out)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
