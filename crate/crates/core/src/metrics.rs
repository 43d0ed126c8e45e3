//! Exact-span micro-averaged precision, recall and F1, token accuracy, and
//! the plain-text evaluation report.
//!
//! A predicted span is correct only when its sentence, start and end all
//! equal those of a gold span. Counts are pooled over every sentence
//! before any ratio is taken.
//!
//! Ratios with a zero denominator follow one convention: a side with
//! nothing to get wrong scores 1. So `(TP, FP) = (0, 0)` gives P = 1,
//! `(TP, FN) = (0, 0)` gives R = 1, and F1 is 1 only when both are 1
//! vacuously, 0 when either side has errors and no hits.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use thiserror::Error;

use crate::corpus::{AnnotatedCorpus, Label};
use crate::tagger::{gold_spans, ConceptSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpanCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl SpanCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        SpanCounts {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
        }
    }
}

impl Add for SpanCounts {
    type Output = SpanCounts;
    fn add(self, o: SpanCounts) -> SpanCounts {
        SpanCounts::new(
            self.true_positives + o.true_positives,
            self.false_positives + o.false_positives,
            self.false_negatives + o.false_negatives,
        )
    }
}

impl AddAssign for SpanCounts {
    fn add_assign(&mut self, o: SpanCounts) {
        *self = *self + o;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Gold,
    Predicted,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold has {gold} sentences, predictions have {predicted}")]
    SentenceCount { gold: usize, predicted: usize },
    #[error("{side:?} spans overlap in sentence {sentence}: [{a_start},{a_end}) and [{b_start},{b_end})")]
    Overlap {
        side: Side,
        sentence: usize,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
    #[error("{side:?} span [{start},{end}) in sentence {sentence} is empty")]
    EmptySpan {
        side: Side,
        sentence: usize,
        start: usize,
        end: usize,
    },
    #[error("sentence {sentence}: gold has {gold} tags, predictions have {predicted}")]
    TagCount {
        sentence: usize,
        gold: usize,
        predicted: usize,
    },
}

fn sorted_checked(spans: &[ConceptSpan], side: Side, sentence: usize) -> Result<Vec<&ConceptSpan>, MetricsError> {
    let mut v: Vec<&ConceptSpan> = spans.iter().collect();
    v.sort_by_key(|s| (s.start, s.end));
    for s in &v {
        if s.is_empty() {
            return Err(MetricsError::EmptySpan {
                side,
                sentence,
                start: s.start,
                end: s.end,
            });
        }
    }
    for w in v.windows(2) {
        if w[1].start < w[0].end {
            return Err(MetricsError::Overlap {
                side,
                sentence,
                a_start: w[0].start,
                a_end: w[0].end,
                b_start: w[1].start,
                b_end: w[1].end,
            });
        }
    }
    Ok(v)
}

/// Matches spans sentence by sentence and sums the counts.
pub fn span_match_counts(
    gold: &[Vec<ConceptSpan>],
    predicted: &[Vec<ConceptSpan>],
) -> Result<SpanCounts, MetricsError> {
    span_match_counts_with(gold, predicted, false)
}

/// As [`span_match_counts`]; with `compare_concepts`, two spans whose
/// concept ids are both present must also agree on them.
pub fn span_match_counts_with(
    gold: &[Vec<ConceptSpan>],
    predicted: &[Vec<ConceptSpan>],
    compare_concepts: bool,
) -> Result<SpanCounts, MetricsError> {
    if gold.len() != predicted.len() {
        return Err(MetricsError::SentenceCount {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let mut total = SpanCounts::default();
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let g = sorted_checked(g, Side::Gold, i)?;
        let p = sorted_checked(p, Side::Predicted, i)?;
        // both lists are sorted and internally disjoint, so a single
        // merge pass finds every exact match
        let (mut a, mut b, mut tp) = (0, 0, 0);
        while a < g.len() && b < p.len() {
            let (ka, kb) = ((g[a].start, g[a].end), (p[b].start, p[b].end));
            if ka == kb {
                let ids_agree = match (&g[a].concept_id, &p[b].concept_id) {
                    (Some(x), Some(y)) if compare_concepts => x == y,
                    _ => true,
                };
                tp += usize::from(ids_agree);
                a += 1;
                b += 1;
            } else if ka < kb {
                a += 1;
            } else {
                b += 1;
            }
        }
        total += SpanCounts::new(tp, p.len() - tp, g.len() - tp);
    }
    Ok(total)
}

/// `(precision, recall, f1)` with the zero-denominator convention from the
/// module docs.
pub fn prf(counts: SpanCounts) -> (f64, f64, f64) {
    let tp = counts.true_positives as f64;
    let ratio = |den: usize| if den == 0 { 1.0 } else { tp / den as f64 };
    let p = ratio(counts.true_positives + counts.false_positives);
    let r = ratio(counts.true_positives + counts.false_negatives);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// `(correct, total)` over real tokens of every sentence.
pub fn token_match_counts(gold: &[Vec<Label>], predicted: &[Vec<Label>]) -> Result<(usize, usize), MetricsError> {
    if gold.len() != predicted.len() {
        return Err(MetricsError::SentenceCount {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    let mut correct = 0;
    let mut total = 0;
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(MetricsError::TagCount {
                sentence: i,
                gold: g.len(),
                predicted: p.len(),
            });
        }
        correct += g.iter().zip(p).filter(|(a, b)| a == b).count();
        total += g.len();
    }
    Ok((correct, total))
}

/// Fraction of tokens whose tag is right; 1 when there are no tokens.
pub fn token_accuracy(gold: &[Vec<Label>], predicted: &[Vec<Label>]) -> Result<f64, MetricsError> {
    let (correct, total) = token_match_counts(gold, predicted)?;
    Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub counts: SpanCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when only span lists were compared.
    pub token_accuracy: Option<f64>,
    pub correct_tokens: usize,
    pub total_tokens: usize,
}

impl EvalResult {
    pub fn from_counts(counts: SpanCounts, tokens: Option<(usize, usize)>) -> Self {
        let (precision, recall, f1) = prf(counts);
        let (correct_tokens, total_tokens) = tokens.unwrap_or((0, 0));
        EvalResult {
            counts,
            precision,
            recall,
            f1,
            token_accuracy: tokens.map(|(c, t)| if t == 0 { 1.0 } else { c as f64 / t as f64 }),
            correct_tokens,
            total_tokens,
        }
    }

    /// Builds a result straight from rates, e.g. to render published
    /// numbers; counts are left at zero.
    pub fn from_rates(precision: f64, recall: f64, f1: f64, accuracy: f64) -> Self {
        EvalResult {
            counts: SpanCounts::default(),
            precision,
            recall,
            f1,
            token_accuracy: Some(accuracy),
            correct_tokens: 0,
            total_tokens: 0,
        }
    }
}

/// Rounds to two decimals, sending exact halves to the even neighbour.
pub fn round_half_even_2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let floor = scaled.floor();
    let diff = scaled - floor;
    let rounded = if (diff - 0.5).abs() < 1e-9 {
        if floor % 2.0 == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    rounded / 100.0
}

fn two_places(x: f64) -> String {
    format!("{:.2}", round_half_even_2(x))
}

pub const REPORT_HEADERS: [&str; 5] = ["Metric", "Precision", "Recall", "F1-score", "Accuracy"];
pub const REPORT_ROW_LABEL: &str = "Bi-GRU Model";

/// Two-line table: headers, then the model row, each cell left-aligned to
/// the wider of header and value and separated by two spaces.
pub fn evaluation_report(result: &EvalResult) -> String {
    let accuracy = result.token_accuracy.map_or_else(|| "-".to_string(), two_places);
    let row = [
        REPORT_ROW_LABEL.to_string(),
        two_places(result.precision),
        two_places(result.recall),
        two_places(result.f1),
        accuracy,
    ];
    let widths: Vec<usize> = REPORT_HEADERS
        .iter()
        .zip(&row)
        .map(|(h, v)| h.len().max(v.len()))
        .collect();
    let line = |cells: &[&str]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i + 1 == cells.len() {
                s.push_str(cell);
            } else {
                let _ = write!(s, "{cell:<w$}  ");
            }
        }
        s
    };
    let row_refs: Vec<&str> = row.iter().map(String::as_str).collect();
    format!("{}\n{}\n", line(&REPORT_HEADERS), line(&row_refs))
}

/// Machine-readable `key=value` lines at full precision.
pub fn porcelain_report(result: &EvalResult) -> String {
    let c = result.counts;
    let mut s = String::new();
    let _ = writeln!(s, "true_positives={}", c.true_positives);
    let _ = writeln!(s, "false_positives={}", c.false_positives);
    let _ = writeln!(s, "false_negatives={}", c.false_negatives);
    let _ = writeln!(s, "precision={}", result.precision);
    let _ = writeln!(s, "recall={}", result.recall);
    let _ = writeln!(s, "f1={}", result.f1);
    match result.token_accuracy {
        Some(a) => {
            let _ = writeln!(s, "token_accuracy={a}");
        }
        None => {
            let _ = writeln!(s, "token_accuracy=");
        }
    }
    let _ = writeln!(s, "correct_tokens={}", result.correct_tokens);
    let _ = writeln!(s, "total_tokens={}", result.total_tokens);
    s
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("gold has {gold} sentences, system has {system}")]
    SentenceCount { gold: usize, system: usize },
    #[error("sentence {sentence} ({doc_id}): gold has {gold} tokens, system has {system}")]
    TokenCount {
        sentence: usize,
        doc_id: String,
        gold: usize,
        system: usize,
    },
    #[error("sentence {sentence} ({doc_id}) token {token}: gold {gold:?}, system {system:?}")]
    TokenText {
        sentence: usize,
        doc_id: String,
        token: usize,
        gold: String,
        system: String,
    },
    #[error(transparent)]
    Spans(#[from] MetricsError),
}

/// Scores a system-labelled copy of a corpus against the gold one.
/// Sentences are paired by position and must hold the same tokens.
pub fn evaluate_corpora(gold: &AnnotatedCorpus, system: &AnnotatedCorpus) -> Result<EvalResult, AlignmentError> {
    if gold.sentences.len() != system.sentences.len() {
        return Err(AlignmentError::SentenceCount {
            gold: gold.sentences.len(),
            system: system.sentences.len(),
        });
    }
    for (i, (g, s)) in gold.sentences.iter().zip(&system.sentences).enumerate() {
        if g.len() != s.len() {
            return Err(AlignmentError::TokenCount {
                sentence: i,
                doc_id: g.doc_id.clone(),
                gold: g.len(),
                system: s.len(),
            });
        }
        if let Some(t) = (0..g.len()).find(|&t| g.tokens[t].surface != s.tokens[t].surface) {
            return Err(AlignmentError::TokenText {
                sentence: i,
                doc_id: g.doc_id.clone(),
                token: t,
                gold: g.tokens[t].surface.clone(),
                system: s.tokens[t].surface.clone(),
            });
        }
    }
    let gs: Vec<Vec<ConceptSpan>> = gold.sentences.iter().map(gold_spans).collect();
    let ss: Vec<Vec<ConceptSpan>> = system.sentences.iter().map(gold_spans).collect();
    let counts = span_match_counts(&gs, &ss)?;
    let gl: Vec<Vec<Label>> = gold.sentences.iter().map(|s| s.labels()).collect();
    let sl: Vec<Vec<Label>> = system.sentences.iter().map(|s| s.labels()).collect();
    let tokens = token_match_counts(&gl, &sl)?;
    Ok(EvalResult::from_counts(counts, Some(tokens)))
}
