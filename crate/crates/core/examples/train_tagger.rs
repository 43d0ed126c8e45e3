//! Trains on the bundled fixture, saves the model and tags a new sentence.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use concept_tagger::corpus::{parse_corpus_with, read_corpus, LabelMode};
use concept_tagger::features::parse_word_vectors;
use concept_tagger::tagger::{load_model, save_model, span_f1, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let corpus = read_corpus(data.join("overfit.conll"), LabelMode::Required)?;
    let vectors = parse_word_vectors(BufReader::new(File::open(data.join("overfit.vec"))?))?;

    let config = TrainConfig {
        epochs: 60,
        patience: None,
        ..TrainConfig::default()
    };
    let outcome = train(&corpus, &vectors, &config)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for r in outcome.history.epochs.iter().step_by(10) {
        println!("epoch {:>3}  train loss {:>9.4}  valid loss {:>8.4}", r.epoch, r.train_loss, r.valid_loss);
    }
    println!(
        "span F1: train {:.3}, held out {:.3}",
        span_f1(&outcome.tagger, &outcome.train_corpus)?,
        span_f1(&outcome.tagger, &outcome.valid_corpus)?
    );

    let path = std::env::temp_dir().join("concept-tagger-example.ctg");
    save_model(&outcome.tagger, &path)?;
    let tagger = load_model(&path)?;
    let text = parse_corpus_with("Patient NN\nreports VBZ\nchest NN\npain NN\n. .\n".as_bytes(), LabelMode::Optional)?;
    let sentence = &text.sentences[0];
    for span in tagger.annotate_sentence(sentence)? {
        let words: Vec<&str> = sentence.tokens[span.start..span.end].iter().map(|t| t.surface.as_str()).collect();
        println!("concept [{}, {}): {}", span.start, span.end, words.join(" "));
    }
    std::fs::remove_file(path)?;
    Ok(())
}
