use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{gold_spans, ConceptSpan, Tagger};
use crate::chunking::{chunk_sentence, ChunkConfig, ChunkError, PaddedChunk};
use crate::corpus::{build_vocab, stratified_split, AnnotatedCorpus, SplitError, Vocabulary};
use crate::features::WordVectors;
use crate::metrics::{prf, span_match_counts};
use crate::neural::{
    adam_step, backward_chunk, chunk_loss, clip_gradients, forward_chunk, AdamState, DropoutMasks,
    FeatureDims, ModelParameters,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub clip_norm: f64,
    pub dropout: f64,
    pub batch_size: usize,
    /// Epochs without a validation-loss improvement before stopping.
    /// `None` trains for all `epochs` and keeps the last parameters.
    pub patience: Option<usize>,
    pub seed: u64,
    pub valid_fraction: f64,
    /// Words rarer than this in the training split map to UNK.
    pub min_count: usize,
    pub chunk: ChunkConfig,
    pub dims: FeatureDims,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            lr: 0.001,
            clip_norm: 5.0,
            dropout: 0.5,
            batch_size: 32,
            patience: Some(3),
            seed: 42,
            valid_fraction: 0.2,
            min_count: 1,
            chunk: ChunkConfig::default(),
            dims: FeatureDims::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str| Err(TrainError::Config(what.to_string()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be a finite non-negative number");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.patience == Some(0) {
            return bad("patience must be positive");
        }
        if !(self.valid_fraction > 0.0 && self.valid_fraction < 1.0) {
            return bad("valid_fraction must be in (0, 1)");
        }
        if self.min_count == 0 {
            return bad("min_count must be positive");
        }
        let d = &self.dims;
        if d.pos_dim == 0 || d.char_dim == 0 || d.char_filters == 0 || d.hidden == 0 {
            return bad("feature and hidden sizes must be positive");
        }
        if d.char_widths.is_empty() || d.char_widths.contains(&0) {
            return bad("char_widths must be a non-empty list of positive widths");
        }
        self.chunk.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Summed training-mode loss over every chunk of the epoch.
    pub train_loss: f64,
    /// Summed inference-mode loss over the validation chunks.
    pub valid_loss: f64,
    pub valid_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    /// Epoch with the lowest validation loss; the earliest on ties.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    /// Tab-separated columns with a header line.
    pub fn to_columns(&self) -> String {
        let mut s = String::from("epoch\ttrain_loss\tvalid_loss\tvalid_f1\n");
        for r in &self.epochs {
            s.push_str(&format!(
                "{}\t{:.10}\t{:.10}\t{:.6}\n",
                r.epoch, r.train_loss, r.valid_loss, r.valid_f1
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub tagger: Tagger,
    pub history: TrainHistory,
    pub train_corpus: AnnotatedCorpus,
    pub valid_corpus: AnnotatedCorpus,
    /// Non-fatal conditions worth reporting, e.g. a corpus without spans.
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("word vectors have dimension 0")]
    EmptyEmbeddings,
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
    #[error("non-finite {what} at epoch {epoch}, batch {batch}")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        batch: usize,
    },
}

fn chunks_of(corpus: &AnnotatedCorpus, vocab: &Vocabulary, cfg: &ChunkConfig) -> Vec<PaddedChunk> {
    corpus
        .sentences
        .iter()
        .flat_map(|s| chunk_sentence(s, vocab, cfg))
        .collect()
}

/// Summed inference-mode loss over every chunk of `corpus`, with the
/// number of real chunk slots it was summed over.
pub fn corpus_loss(tagger: &Tagger, corpus: &AnnotatedCorpus) -> (f64, usize) {
    let chunks = chunks_of(corpus, &tagger.vocab, &tagger.chunk);
    let loss = chunks
        .iter()
        .map(|c| chunk_loss(&forward_chunk(&tagger.params, c, None), c))
        .sum();
    (loss, chunks.iter().map(PaddedChunk::real_len).sum())
}

/// Exact-span F1 of the tagger on a labelled corpus.
pub fn span_f1(tagger: &Tagger, corpus: &AnnotatedCorpus) -> Result<f64, ChunkError> {
    let gold: Vec<Vec<ConceptSpan>> = corpus.sentences.iter().map(gold_spans).collect();
    let predicted = corpus
        .sentences
        .iter()
        .map(|s| tagger.annotate_sentence(s))
        .collect::<Result<Vec<_>, _>>()?;
    let counts = span_match_counts(&gold, &predicted).expect("decoded spans are disjoint");
    Ok(prf(counts).2)
}

/// Splits the corpus, builds the vocabulary from the training side and
/// runs mini-batch Adam with early stopping on validation loss.
pub fn train(
    corpus: &AnnotatedCorpus,
    vectors: &WordVectors,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if corpus.sentences.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if vectors.dim == 0 {
        return Err(TrainError::EmptyEmbeddings);
    }
    let mut warnings = Vec::new();
    if corpus.sentences.iter().all(|s| s.concept_count() == 0) {
        warnings.push("corpus has no concept spans; the model can only learn O".to_string());
    }
    let split = stratified_split(corpus, config.valid_fraction, config.seed)?;
    if !split.stratified {
        warnings.push("too few concept-bearing sentences to stratify; split is unstratified".to_string());
    }
    let vocab = build_vocab(&split.train, config.min_count);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ModelParameters::init(&vocab, vectors, &config.dims, &mut rng);
    let mut tagger = Tagger {
        params,
        vocab,
        chunk: config.chunk,
    };

    let train_chunks = chunks_of(&split.train, &tagger.vocab, &config.chunk);
    let input_dim = tagger.params.dims().input_dim();
    let hidden = config.dims.hidden;
    let mut adam = AdamState::new(&tagger.params);
    let mut history = TrainHistory::default();
    let mut best: Option<(usize, f64, Option<ModelParameters>)> = None;
    let mut order: Vec<usize> = (0..train_chunks.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let batch_no = b + 1;
            let mut grads = tagger.params.zeros_like();
            let mut batch_loss = 0.0;
            for &i in batch {
                let chunk = &train_chunks[i];
                let masks = (config.dropout > 0.0).then(|| {
                    DropoutMasks::sample(chunk.real_len(), input_dim, hidden, config.dropout, &mut rng)
                });
                let pass = forward_chunk(&tagger.params, chunk, masks.as_ref());
                batch_loss += chunk_loss(&pass, chunk);
                backward_chunk(&tagger.params, chunk, &pass, masks.as_ref(), &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFinite {
                    what: "loss",
                    epoch,
                    batch: batch_no,
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            if !clip_gradients(&mut grads, config.clip_norm).is_finite() {
                return Err(TrainError::NonFinite {
                    what: "gradient",
                    epoch,
                    batch: batch_no,
                });
            }
            adam_step(&mut tagger.params, &grads, &mut adam, config.lr);
            epoch_loss += batch_loss;
        }

        let (valid_loss, _) = corpus_loss(&tagger, &split.valid);
        if !valid_loss.is_finite() {
            return Err(TrainError::NonFinite {
                what: "validation loss",
                epoch,
                batch: 0,
            });
        }
        let valid_f1 = span_f1(&tagger, &split.valid)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            valid_loss,
            valid_f1,
        });
        history.stopped_epoch = epoch;

        if best.as_ref().is_none_or(|(_, l, _)| valid_loss < *l) {
            let snapshot = config.patience.map(|_| tagger.params.clone());
            best = Some((epoch, valid_loss, snapshot));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if config.patience.is_some_and(|p| epoch - best_epoch >= p) {
            break;
        }
    }

    if let Some((epoch, _, snapshot)) = best {
        history.best_epoch = Some(epoch);
        if let Some(params) = snapshot {
            tagger.params = params;
        }
    }
    Ok(TrainOutcome {
        tagger,
        history,
        train_corpus: split.train,
        valid_corpus: split.valid,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;

    fn corpus() -> AnnotatedCorpus {
        let mut text = String::new();
        for i in 0..10 {
            text.push_str(&format!("patient NN O\nreports VBZ O\nchest NN B\npain NN I\nday{i} NN O\n\n"));
            text.push_str(&format!("no DT O\nfever NN B\nseen{i} VBN O\n\n"));
        }
        parse_corpus(text.as_bytes()).unwrap()
    }

    fn small() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 4,
            dims: FeatureDims {
                pos_dim: 3,
                char_dim: 4,
                char_filters: 3,
                hidden: 6,
                ..FeatureDims::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_are_the_published_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.epochs, 15);
        assert_eq!(c.lr, 0.001);
        assert_eq!(c.clip_norm, 5.0);
        assert_eq!(c.dropout, 0.5);
        assert_eq!(c.valid_fraction, 0.2);
        assert_eq!((c.chunk.window, c.chunk.overlap), (19, 2));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn invalid_settings_are_rejected() {
        for c in [
            TrainConfig { valid_fraction: 1.0, ..small() },
            TrainConfig { batch_size: 0, ..small() },
            TrainConfig { dropout: 1.0, ..small() },
            TrainConfig { patience: Some(0), ..small() },
            TrainConfig { chunk: ChunkConfig { window: 4, overlap: 4 }, ..small() },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn zero_learning_rate_freezes_everything() {
        let cfg = TrainConfig { lr: 0.0, patience: None, ..small() };
        let out = train(&corpus(), &WordVectors::new(4), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = ModelParameters::init(&out.tagger.vocab, &WordVectors::new(4), &cfg.dims, &mut rng);
        assert_eq!(out.tagger.params, init);
        let v: Vec<f64> = out.history.epochs.iter().map(|r| r.valid_loss).collect();
        assert!(v.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn same_seed_same_history() {
        let a = train(&corpus(), &WordVectors::new(4), &small()).unwrap();
        let b = train(&corpus(), &WordVectors::new(4), &small()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.tagger, b.tagger);
        assert_eq!(a.history.to_columns(), b.history.to_columns());
    }

    #[test]
    fn zero_epochs_gives_an_untrained_model() {
        let cfg = TrainConfig { epochs: 0, ..small() };
        let out = train(&corpus(), &WordVectors::new(4), &cfg).unwrap();
        assert!(out.history.epochs.is_empty());
        assert_eq!(out.history.best_epoch, None);
        assert_eq!(out.history.stopped_epoch, 0);
        assert_eq!(out.history.to_columns(), "epoch\ttrain_loss\tvalid_loss\tvalid_f1\n");
    }

    #[test]
    fn early_stopping_respects_patience() {
        // a large learning rate makes validation loss bounce
        let cfg = TrainConfig { epochs: 30, lr: 0.05, patience: Some(2), ..small() };
        let out = train(&corpus(), &WordVectors::new(4), &cfg).unwrap();
        let h = &out.history;
        let best = h.best_epoch.unwrap();
        assert!(h.stopped_epoch - best <= 2);
        assert!(h.stopped_epoch <= 30);
        let min = h.epochs.iter().map(|r| r.valid_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(h.epochs[best - 1].valid_loss, min);
        // restored parameters reproduce the best validation loss
        assert_eq!(corpus_loss(&out.tagger, &out.valid_corpus).0, min);
    }

    #[test]
    fn spanless_corpus_trains_with_a_warning() {
        let c = parse_corpus("a DT O\nb NN O\n\nc DT O\n\nd NN O\n".as_bytes()).unwrap();
        let out = train(&c, &WordVectors::new(4), &small()).unwrap();
        assert!(out.warnings.iter().any(|w| w.contains("no concept spans")));
    }

    #[test]
    fn exploding_learning_rate_is_reported() {
        let cfg = TrainConfig { lr: 1e200, dropout: 0.0, clip_norm: 1e300, ..small() };
        match train(&corpus(), &WordVectors::new(4), &cfg) {
            Err(TrainError::NonFinite { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected a non-finite error, got {other:?}"),
        }
    }
}
