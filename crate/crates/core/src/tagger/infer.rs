use thiserror::Error;

use super::{decode_iob, ConceptSpan};
use crate::chunking::{chunk_sentence, merge_chunk_predictions, ChunkConfig, ChunkError};
use crate::corpus::{AnnotatedCorpus, AnnotatedSentence, Label, Vocabulary};
use crate::features::WordVectors;
use crate::neural::{forward_chunk, ModelParameters};
use crate::tensor::Tensor;

/// First index of the maximum, so ties resolve B, then I, then O.
pub fn argmax_label(dist: &[f64; 3]) -> Label {
    let mut best = 0;
    for k in 1..3 {
        if dist[k] > dist[best] {
            best = k;
        }
    }
    Label::ALL[best]
}

/// Per-token predicted tags for one sentence. Tokens missing from the
/// vocabulary map to UNK.
pub fn predict_labels(
    model: &ModelParameters,
    vocab: &Vocabulary,
    sentence: &AnnotatedSentence,
    config: &ChunkConfig,
) -> Result<Vec<Label>, ChunkError> {
    if sentence.is_empty() {
        return Ok(Vec::new());
    }
    let chunks = chunk_sentence(sentence, vocab, config);
    let tags: Vec<Vec<Label>> = chunks
        .iter()
        .map(|c| forward_chunk(model, c, None).probs.iter().map(argmax_label).collect())
        .collect();
    merge_chunk_predictions(chunks.iter().zip(tags.iter().map(Vec::as_slice)))
}

pub fn annotate_sentence(
    model: &ModelParameters,
    vocab: &Vocabulary,
    sentence: &AnnotatedSentence,
    config: &ChunkConfig,
) -> Result<Vec<ConceptSpan>, ChunkError> {
    Ok(decode_iob(&predict_labels(model, vocab, sentence, config)?))
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("embedding dimension {found} does not match the model's word dimension {expected}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

/// A trained model bundled with everything needed to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagger {
    pub params: ModelParameters,
    pub vocab: Vocabulary,
    pub chunk: ChunkConfig,
}

impl Tagger {
    pub fn predict_labels(&self, sentence: &AnnotatedSentence) -> Result<Vec<Label>, ChunkError> {
        predict_labels(&self.params, &self.vocab, sentence, &self.chunk)
    }

    pub fn annotate_sentence(&self, sentence: &AnnotatedSentence) -> Result<Vec<ConceptSpan>, ChunkError> {
        annotate_sentence(&self.params, &self.vocab, sentence, &self.chunk)
    }

    /// Copy of `corpus` with predicted labels; concept ids are dropped.
    pub fn tag_corpus(&self, corpus: &AnnotatedCorpus) -> Result<AnnotatedCorpus, ChunkError> {
        let mut out = corpus.clone();
        for sentence in &mut out.sentences {
            let labels = self.predict_labels(sentence)?;
            for (token, label) in sentence.tokens.iter_mut().zip(labels) {
                token.label = label;
                token.concept_id = None;
            }
        }
        Ok(out)
    }

    /// Adds a word-table row for every word of `corpus` that is missing
    /// from the vocabulary but present in `vectors`. Returns how many
    /// words were added.
    pub fn extend_vocabulary(
        &mut self,
        corpus: &AnnotatedCorpus,
        vectors: &WordVectors,
    ) -> Result<usize, DimensionMismatch> {
        let dim = self.params.word.dim();
        if vectors.dim != dim {
            return Err(DimensionMismatch {
                expected: dim,
                found: vectors.dim,
            });
        }
        let mut added = 0;
        for token in corpus.sentences.iter().flat_map(|s| &s.tokens) {
            if self.vocab.words.contains(token.surface.as_str()) {
                continue;
            }
            let Some(v) = vectors.vectors.get(&token.surface) else { continue };
            self.vocab.add_word(&token.surface);
            let m = &mut self.params.word.matrix;
            let mut data = m.data().to_vec();
            data.extend_from_slice(v);
            *m = Tensor::from_vec(m.rows() + 1, dim, data);
            added += 1;
        }
        Ok(added)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, parse_corpus, parse_corpus_with, LabelMode};
    use crate::neural::FeatureDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model_for(text: &str) -> (ModelParameters, Vocabulary, AnnotatedCorpus) {
        let corpus = parse_corpus(text.as_bytes()).unwrap();
        let vocab = build_vocab(&corpus, 1);
        let dims = FeatureDims {
            pos_dim: 3,
            char_dim: 4,
            char_filters: 3,
            hidden: 5,
            ..FeatureDims::default()
        };
        let params = ModelParameters::init(&vocab, &WordVectors::new(4), &dims, &mut ChaCha8Rng::seed_from_u64(5));
        (params, vocab, corpus)
    }

    #[test]
    fn ties_resolve_toward_begin() {
        assert_eq!(argmax_label(&[1.0 / 3.0; 3]), Label::B);
        assert_eq!(argmax_label(&[0.2, 0.4, 0.4]), Label::I);
        assert_eq!(argmax_label(&[0.1, 0.2, 0.7]), Label::O);
    }

    #[test]
    fn zero_model_tags_a_single_token_as_a_span() {
        let (params, vocab, corpus) = model_for("fever NN O\n");
        let zero = params.zeros_like();
        let spans = annotate_sentence(&zero, &vocab, &corpus.sentences[0], &ChunkConfig::default()).unwrap();
        assert_eq!(spans, vec![ConceptSpan::new(0, 1)]);
    }

    #[test]
    fn unknown_words_and_tags_do_not_fail() {
        let (params, vocab, _) = model_for("fever NN O\n");
        let unseen = parse_corpus_with("zzz QQ\nyyy RR\n".as_bytes(), LabelMode::Optional).unwrap();
        let labels = predict_labels(&params, &vocab, &unseen.sentences[0], &ChunkConfig::default()).unwrap();
        assert_eq!(labels.len(), 2);
    }

    #[test]
    fn inference_is_pure_and_long_sentences_are_merged() {
        let text: String = (0..45).map(|i| format!("w{} NN O\n", i % 7)).collect();
        let (params, vocab, corpus) = model_for(&text);
        let cfg = ChunkConfig::default();
        let a = predict_labels(&params, &vocab, &corpus.sentences[0], &cfg).unwrap();
        let b = predict_labels(&params, &vocab, &corpus.sentences[0], &cfg).unwrap();
        assert_eq!(a.len(), 45);
        assert_eq!(a, b);
    }

    #[test]
    fn short_sentence_prediction_matches_single_chunk() {
        let (params, vocab, corpus) = model_for("chest NN B\npain NN I\nnoted VB O\n");
        let s = &corpus.sentences[0];
        let chunk = &chunk_sentence(s, &vocab, &ChunkConfig::default())[0];
        let direct: Vec<Label> = forward_chunk(&params, chunk, None).probs.iter().map(argmax_label).collect();
        assert_eq!(predict_labels(&params, &vocab, s, &ChunkConfig::default()).unwrap(), direct);
    }

    #[test]
    fn vocabulary_extension_uses_pretrained_rows() {
        let (params, vocab, _) = model_for("fever NN O\n");
        let mut tagger = Tagger { params, vocab, chunk: ChunkConfig::default() };
        let mut vectors = WordVectors::new(4);
        vectors.vectors.insert("cough".into(), vec![0.5, 0.25, -0.5, 1.0]);
        let input = parse_corpus_with("cough NN\nrash NN\n".as_bytes(), LabelMode::Optional).unwrap();
        assert_eq!(tagger.extend_vocabulary(&input, &vectors), Ok(1));
        let idx = tagger.vocab.word("cough");
        assert_eq!(tagger.params.word.lookup(idx), &[0.5, 0.25, -0.5, 1.0]);
        assert_eq!(tagger.vocab.word("rash"), crate::corpus::UNK);
        let wrong = WordVectors::new(7);
        assert_eq!(
            tagger.extend_vocabulary(&input, &wrong),
            Err(DimensionMismatch { expected: 4, found: 7 })
        );
    }
}
