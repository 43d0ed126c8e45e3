//! Annotated corpora: token normalization, the column file format,
//! vocabularies, stratified train/validation splitting and descriptive
//! statistics.

mod parse;
mod split;
mod stats;
mod vocab;

use std::fmt;
use std::str::FromStr;

pub use parse::{parse_corpus, parse_corpus_with, read_corpus, write_corpus, LabelMode};
pub use split::{stratified_split, Split, SplitError};
pub use stats::{corpus_stats, StatsReport};
pub use vocab::{build_vocab, Vocabulary, PAD, UNK};

/// Stand-in for a token that normalizes to nothing. Never enters a
/// vocabulary, so it always looks up as UNK.
pub const EMPTY_PLACEHOLDER: &str = "□";

/// IOB tag. The declaration order is the argmax tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    B,
    I,
    O,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::B, Label::I, Label::O];

    pub fn index(self) -> usize {
        match self {
            Label::B => 0,
            Label::I => 1,
            Label::O => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::B => "B",
            Label::I => "I",
            Label::O => "O",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown label {:?} (expected B, I or O)", self.0)
    }
}

impl std::error::Error for UnknownLabel {}

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "B" => Ok(Label::B),
            "I" => Ok(Label::I),
            "O" => Ok(Label::O),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    /// Normalized surface form, never empty.
    pub surface: String,
    pub pos: String,
    pub label: Label,
    pub concept_id: Option<String>,
}

impl RawToken {
    /// Builds a token, normalizing `surface`.
    pub fn new(surface: &str, pos: &str, label: Label) -> Self {
        RawToken {
            surface: normalize_token(surface),
            pos: pos.to_string(),
            label,
            concept_id: None,
        }
    }

    pub fn with_concept(mut self, concept_id: impl Into<String>) -> Self {
        self.concept_id = Some(concept_id.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<RawToken>,
    pub doc_id: String,
    pub sent_index: usize,
}

impl AnnotatedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.tokens.iter().map(|t| t.label).collect()
    }

    /// Number of `B` tokens, i.e. well-formed concept starts.
    pub fn begin_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.label == Label::B).count()
    }

    /// Number of concept mentions: maximal runs of non-`O` tags that start
    /// with `B` or with an orphan `I`.
    pub fn concept_count(&self) -> usize {
        let mut prev = Label::O;
        let mut n = 0;
        for t in &self.tokens {
            if t.label == Label::B || (t.label == Label::I && prev == Label::O) {
                n += 1;
            }
            prev = t.label;
        }
        n
    }

    /// Positions of `I` tags that do not continue a span (sentence-initial
    /// or directly after `O`).
    pub fn orphan_inside_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut prev = Label::O;
        for (i, token) in self.tokens.iter().enumerate() {
            if token.label == Label::I && prev == Label::O {
                out.push(i);
            }
            prev = token.label;
        }
        out
    }

    pub fn is_well_formed(&self) -> bool {
        self.orphan_inside_positions().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedCorpus {
    pub sentences: Vec<AnnotatedSentence>,
    /// Document ids in file order, including documents with no sentences.
    pub documents: Vec<String>,
}

impl AnnotatedCorpus {
    pub fn note_count(&self) -> usize {
        self.documents.len()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.len()).sum()
    }

    /// Sentences grouped by document, in document order.
    pub fn sentences_per_document(&self) -> Vec<(&str, usize)> {
        self.documents
            .iter()
            .map(|d| {
                let n = self.sentences.iter().filter(|s| &s.doc_id == d).count();
                (d.as_str(), n)
            })
            .collect()
    }

    /// Keeps only the given sentences (by position) and the documents they
    /// reference.
    pub(crate) fn subset(&self, indices: &[usize]) -> AnnotatedCorpus {
        let mut picked: Vec<usize> = indices.to_vec();
        picked.sort_unstable();
        let sentences: Vec<AnnotatedSentence> =
            picked.iter().map(|&i| self.sentences[i].clone()).collect();
        let documents = self
            .documents
            .iter()
            .filter(|d| sentences.iter().any(|s| &s.doc_id == *d))
            .cloned()
            .collect();
        AnnotatedCorpus {
            sentences,
            documents,
        }
    }
}

/// Lowercases, drops non-ASCII characters and strips one trailing period
/// from short alphabetic shorthand ("mg." becomes "mg"). A token that ends
/// up empty becomes [`EMPTY_PLACEHOLDER`].
pub fn normalize_token(raw: &str) -> String {
    let mut out: String = raw
        .chars()
        .filter(char::is_ascii)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    if let Some(stem) = out.strip_suffix('.') {
        if (1..=4).contains(&stem.len()) && stem.bytes().all(|b| b.is_ascii_alphabetic()) {
            out.truncate(stem.len());
        }
    }
    if out.is_empty() {
        EMPTY_PLACEHOLDER.to_string()
    } else {
        out
    }
}
