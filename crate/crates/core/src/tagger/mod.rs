//! Training, inference, span decoding and model persistence.

mod archive;
mod infer;
mod spanlist;
mod train;

pub use archive::{load_model, read_model, save_model, write_model, ArchiveError, FORMAT_VERSION, MAGIC};
pub use infer::{annotate_sentence, argmax_label, predict_labels, DimensionMismatch, Tagger};
pub use spanlist::{looks_like_span_list, parse_span_list, write_span_list, SpanListError, SpanRecord};
pub use train::{corpus_loss, span_f1, train, EpochRecord, TrainConfig, TrainError, TrainHistory, TrainOutcome};

use crate::corpus::{AnnotatedSentence, Label};

/// Half-open token range `[start, end)` within one sentence. Sentence
/// identity is carried by the position of the span list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptSpan {
    pub start: usize,
    pub end: usize,
    pub concept_id: Option<String>,
}

impl ConceptSpan {
    pub fn new(start: usize, end: usize) -> Self {
        ConceptSpan {
            start,
            end,
            concept_id: None,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Spans of a tag sequence. An `I` with no open span (sentence-initial or
/// after `O`) opens one as if it were `B`; `O` closes any open span.
pub fn decode_iob(tags: &[Label]) -> Vec<ConceptSpan> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &tag) in tags.iter().enumerate() {
        match tag {
            Label::B => {
                if let Some(s) = open.replace(i) {
                    spans.push(ConceptSpan::new(s, i));
                }
            }
            Label::I => {
                open.get_or_insert(i);
            }
            Label::O => {
                if let Some(s) = open.take() {
                    spans.push(ConceptSpan::new(s, i));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push(ConceptSpan::new(s, tags.len()));
    }
    spans
}

/// IOB2 tags for non-overlapping spans over a sentence of `len` tokens.
pub fn encode_spans(spans: &[ConceptSpan], len: usize) -> Vec<Label> {
    let mut tags = vec![Label::O; len];
    for span in spans {
        tags[span.start] = Label::B;
        for t in &mut tags[span.start + 1..span.end] {
            *t = Label::I;
        }
    }
    tags
}

/// Gold spans of an annotated sentence. A span takes the concept id of
/// its first token, if any.
pub fn gold_spans(sentence: &AnnotatedSentence) -> Vec<ConceptSpan> {
    decode_iob(&sentence.labels())
        .into_iter()
        .map(|mut span| {
            span.concept_id = sentence.tokens[span.start].concept_id.clone();
            span
        })
        .collect()
}
