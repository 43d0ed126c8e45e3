//! Span-level scoring of system output against gold annotations.

use concept_tagger::corpus::parse_corpus;
use concept_tagger::metrics::{evaluate_corpora, evaluation_report, porcelain_report};
use concept_tagger::tagger::gold_spans;

const GOLD: &str = "\
no DT O
chest NN B
pain NN I
or CC O
fever NN B
";

const SYSTEM: &str = "\
no DT O
chest NN B
pain NN I
or CC B
fever NN I
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gold = parse_corpus(GOLD.as_bytes())?;
    let system = parse_corpus(SYSTEM.as_bytes())?;
    println!("gold spans   {:?}", gold_spans(&gold.sentences[0]));
    println!("system spans {:?}\n", gold_spans(&system.sentences[0]));

    let result = evaluate_corpora(&gold, &system)?;
    print!("{}", evaluation_report(&result));
    print!("\n{}", porcelain_report(&result));
    Ok(())
}
