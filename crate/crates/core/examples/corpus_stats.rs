//! Descriptive statistics of a column-format corpus.
//!
//! `cargo run --example corpus_stats [-- path/to/corpus.conll]`

use std::path::PathBuf;

use concept_tagger::chunking::ChunkConfig;
use concept_tagger::corpus::{corpus_stats, read_corpus, LabelMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/stats_fixture.conll")
    });
    let corpus = read_corpus(&path, LabelMode::Required)?;
    let report = corpus_stats(&corpus, &ChunkConfig::default());
    print!("{report}");

    let docs = corpus.sentences_per_document();
    println!("\nSentences per note");
    for (doc, n) in docs {
        println!("{doc:<12}{n:>5}");
    }
    Ok(())
}
