use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{AnnotatedCorpus, Label};

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("validation fraction must lie strictly between 0 and 1, got {0}")]
    Fraction(f64),
    #[error("need at least 2 sentences to split, got {0}")]
    TooSmall(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: AnnotatedCorpus,
    pub valid: AnnotatedCorpus,
    /// False when fewer than two sentences carry concepts and the split
    /// fell back to a plain shuffled cut.
    pub stratified: bool,
}

impl Split {
    /// Share of `B` tokens among all tokens of a corpus.
    pub fn begin_fraction(corpus: &AnnotatedCorpus) -> f64 {
        let tokens = corpus.token_count();
        if tokens == 0 {
            return 0.0;
        }
        let b = corpus
            .sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| t.label == Label::B)
            .count();
        b as f64 / tokens as f64
    }
}

/// Sentence-level train/validation split that keeps concept-bearing
/// sentences proportionally represented on both sides.
///
/// Concept-bearing and concept-free sentences are shuffled separately.
/// The validation side receives `round(f * |concept sentences|)` of the
/// former (at least one, and at least one left for training), chosen
/// greedily by descending concept count so that its concept total
/// approaches `f` times the corpus total; the remaining validation slots
/// are filled from the concept-free pool.
pub fn stratified_split(
    corpus: &AnnotatedCorpus,
    valid_fraction: f64,
    seed: u64,
) -> Result<Split, SplitError> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(SplitError::Fraction(valid_fraction));
    }
    let n = corpus.sentences.len();
    if n < 2 {
        return Err(SplitError::TooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_valid = ((valid_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let counts: Vec<usize> = corpus.sentences.iter().map(|s| s.concept_count()).collect();
    let (mut with, mut without): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| counts[i] > 0);
    with.shuffle(&mut rng);
    without.shuffle(&mut rng);

    if with.len() < 2 {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let (valid, train) = all.split_at(n_valid);
        return Ok(Split {
            train: corpus.subset(train),
            valid: corpus.subset(valid),
            stratified: false,
        });
    }

    let mut k_with = ((valid_fraction * with.len() as f64).round() as usize)
        .clamp(1, with.len() - 1)
        .min(n_valid);
    // not enough concept-free sentences to fill the remaining slots
    if n_valid - k_with > without.len() {
        k_with = (n_valid - without.len()).min(with.len() - 1);
    }
    let k_without = (n_valid - k_with).min(without.len());

    let total: usize = with.iter().map(|&i| counts[i]).sum();
    let target = valid_fraction * total as f64;
    let mut ordered = with.clone();
    ordered.sort_by(|a, b| counts[*b].cmp(&counts[*a]));

    let mut valid = Vec::with_capacity(n_valid);
    let mut train = Vec::with_capacity(n - n_valid);
    let mut taken = 0usize;
    let mut running = 0usize;
    for (pos, &i) in ordered.iter().enumerate() {
        let slots = k_with - taken;
        let remaining = ordered.len() - pos;
        let take = slots > 0 && (remaining == slots || (running + counts[i]) as f64 <= target);
        if take {
            valid.push(i);
            taken += 1;
            running += counts[i];
        } else {
            train.push(i);
        }
    }
    valid.extend_from_slice(&without[..k_without]);
    train.extend_from_slice(&without[k_without..]);

    Ok(Split {
        train: corpus.subset(&train),
        valid: corpus.subset(&valid),
        stratified: true,
    })
}
