use std::collections::BTreeMap;
use std::fmt;

use super::AnnotatedCorpus;
use crate::chunking::{chunk_count, ChunkConfig};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StatsReport {
    pub note_count: usize,
    pub sentence_count_before_chunking: usize,
    pub chunk_count_after_chunking: usize,
    pub concept_span_count: usize,
    /// Sentence length (tokens) to number of sentences.
    pub sentence_length_histogram: BTreeMap<usize, usize>,
}

pub fn corpus_stats(corpus: &AnnotatedCorpus, chunk_config: &ChunkConfig) -> StatsReport {
    let mut report = StatsReport {
        note_count: corpus.note_count(),
        sentence_count_before_chunking: corpus.sentences.len(),
        ..StatsReport::default()
    };
    for s in &corpus.sentences {
        report.chunk_count_after_chunking += chunk_count(s.len(), chunk_config);
        report.concept_span_count += s.concept_count();
        *report.sentence_length_histogram.entry(s.len()).or_insert(0) += 1;
    }
    report
}

impl StatsReport {
    pub fn rows(&self) -> [(&'static str, usize); 4] {
        [
            ("Total number of notes", self.note_count),
            (
                "Number of sentences before chunking",
                self.sentence_count_before_chunking,
            ),
            (
                "Number of sentences after chunking",
                self.chunk_count_after_chunking,
            ),
            ("Number of annotated concepts", self.concept_span_count),
        ]
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.rows();
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        writeln!(f, "{:<width$}  {:>8}", "Metric", "Value")?;
        for (name, value) in rows {
            writeln!(f, "{name:<width$}  {value:>8}")?;
        }
        writeln!(f)?;
        writeln!(f, "{:<8}  {:>8}", "Length", "Count")?;
        for (len, count) in &self.sentence_length_histogram {
            writeln!(f, "{len:<8}  {count:>8}")?;
        }
        Ok(())
    }
}
