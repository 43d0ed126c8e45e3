//! Splitting a long sentence into overlapping windows and merging
//! per-window tags back.

use concept_tagger::chunking::{chunk_bounds, chunk_sentence, merge_chunk_predictions, ChunkConfig};
use concept_tagger::corpus::{build_vocab, AnnotatedCorpus, AnnotatedSentence, Label, RawToken};

fn main() {
    let text = "the patient was admitted with acute chest pain and shortness of breath \
                after a long history of poorly controlled type two diabetes mellitus and \
                chronic kidney disease stage three";
    let concepts = [(5, 8), (9, 12), (17, 22), (23, 28)];
    let tokens = text
        .split_whitespace()
        .enumerate()
        .map(|(i, w)| {
            let label = match concepts.iter().find(|(s, e)| (*s..*e).contains(&i)) {
                Some((s, _)) if *s == i => Label::B,
                Some(_) => Label::I,
                None => Label::O,
            };
            RawToken::new(w, "NN", label)
        })
        .collect();
    let sentence = AnnotatedSentence {
        tokens,
        doc_id: "note".into(),
        sent_index: 0,
    };
    let corpus = AnnotatedCorpus {
        documents: vec!["note".into()],
        sentences: vec![sentence.clone()],
    };
    let vocab = build_vocab(&corpus, 1);
    let cfg = ChunkConfig::default();

    println!("{} tokens, window {}, overlap {}", sentence.len(), cfg.window, cfg.overlap);
    for (offset, real) in chunk_bounds(sentence.len(), &cfg) {
        println!("  tokens {offset:>2}..{:<2} ({real} real, {} pad)", offset + real, cfg.window - real);
    }

    let chunks = chunk_sentence(&sentence, &vocab, &cfg);
    let merged = merge_chunk_predictions(chunks.iter().map(|c| (c, c.labels.as_slice()))).expect("consistent chunks");
    assert_eq!(merged, sentence.labels());
    let tags: String = merged.iter().map(|l| l.as_str()).collect();
    println!("merged tags: {tags}");
}
