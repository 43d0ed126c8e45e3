use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use concept_tagger::chunking::{chunk_bounds, chunk_count, chunk_sentence, merge_chunk_predictions, ChunkConfig};
use concept_tagger::corpus::{build_vocab, AnnotatedCorpus, AnnotatedSentence, Label, RawToken};
use concept_tagger::features::{char_cnn_forward, CharCnnParams};
use concept_tagger::metrics::{prf, span_match_counts};
use concept_tagger::neural::{clip_gradients, global_norm, gradcheck_fixture, softmax};
use concept_tagger::tagger::{decode_iob, encode_spans, ConceptSpan};

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::B), Just(Label::I), Just(Label::O)]
}

fn config() -> impl Strategy<Value = ChunkConfig> {
    (2usize..30).prop_flat_map(|w| (Just(w), 1..w)).prop_map(|(window, overlap)| ChunkConfig { window, overlap })
}

fn sentence(labels: &[Label]) -> AnnotatedSentence {
    AnnotatedSentence {
        tokens: labels
            .iter()
            .enumerate()
            .map(|(i, &l)| RawToken::new(&format!("w{}", i % 7), "NN", l))
            .collect(),
        doc_id: "doc0".into(),
        sent_index: 0,
    }
}

fn spans(len: usize) -> impl Strategy<Value = Vec<ConceptSpan>> {
    prop::collection::vec(label(), len).prop_map(|labels| decode_iob(&labels))
}

proptest! {
    #[test]
    fn chunks_tile_the_sentence(cfg in config(), len in 1usize..200) {
        let bounds = chunk_bounds(len, &cfg);
        prop_assert_eq!(bounds.len(), chunk_count(len, &cfg));
        prop_assert_eq!(bounds[0].0, 0);
        let (last_offset, last_real) = *bounds.last().unwrap();
        prop_assert_eq!(last_offset + last_real, len);
        for pair in bounds.windows(2) {
            let ((a, ra), (b, _)) = (pair[0], pair[1]);
            prop_assert_eq!(b - a, cfg.stride());
            prop_assert_eq!(a + ra - b, cfg.overlap);
        }
    }

    #[test]
    fn merging_gold_chunks_restores_labels(cfg in config(), labels in prop::collection::vec(label(), 1..120)) {
        let s = sentence(&labels);
        let corpus = AnnotatedCorpus { documents: vec!["doc0".into()], sentences: vec![s.clone()] };
        let vocab = build_vocab(&corpus, 1);
        let chunks = chunk_sentence(&s, &vocab, &cfg);
        for c in &chunks {
            prop_assert_eq!(c.window(), cfg.window);
        }
        let merged = merge_chunk_predictions(chunks.iter().map(|c| (c, c.labels.as_slice()))).unwrap();
        prop_assert_eq!(merged, labels);
    }

    #[test]
    fn span_counts_are_symmetric(gold in spans(25), pred in spans(25)) {
        let forward = span_match_counts(std::slice::from_ref(&gold), std::slice::from_ref(&pred)).unwrap();
        let back = span_match_counts(std::slice::from_ref(&pred), std::slice::from_ref(&gold)).unwrap();
        prop_assert_eq!(forward.true_positives, back.true_positives);
        prop_assert_eq!(forward.false_positives, back.false_negatives);
        prop_assert_eq!(forward.true_positives + forward.false_negatives, gold.len());
        prop_assert_eq!(forward.true_positives + forward.false_positives, pred.len());
        let (p, r, f) = prf(forward);
        for x in [p, r, f] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!(f <= p.max(r) + 1e-12 && f >= p.min(r) - 1e-12);
    }

    #[test]
    fn decoded_spans_encode_back(labels in prop::collection::vec(label(), 0..60)) {
        let spans = decode_iob(&labels);
        let again = decode_iob(&encode_spans(&spans, labels.len()));
        prop_assert_eq!(again, spans);
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::array::uniform3(-700.0f64..700.0)) {
        let p = softmax(logits);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted = softmax(logits.map(|l| l + 3.5));
        for (a, b) in p.iter().zip(shifted) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn char_features_are_relu_pooled(seed in 0u64..1000, word in prop::collection::vec(2usize..9, 1..15)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = CharCnnParams::init(9, 4, &[2, 3], 5, &mut rng);
        let out = char_cnn_forward(&word, &params);
        prop_assert_eq!(out.len(), params.output_dim());
        prop_assert!(out.iter().all(|x| *x >= 0.0 && x.is_finite()));
    }

    #[test]
    fn clipping_bounds_the_global_norm(seed in 0u64..500, k in 0.01f64..1e4) {
        let (model, _) = gradcheck_fixture(seed, true);
        let mut grads = model.clone();
        grads.scale(k);
        let before = global_norm(&grads);
        let reported = clip_gradients(&mut grads, 5.0);
        prop_assert_eq!(reported, before);
        let after = global_norm(&grads);
        prop_assert!(after <= 5.0 + 1e-9);
        if before <= 5.0 {
            prop_assert_eq!(after, before);
        }
    }
}
