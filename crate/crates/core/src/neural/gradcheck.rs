//! Central finite-difference check of the analytic gradients.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::dropout::DropoutMasks;
use super::model::{backward, chunk_loss, forward_chunk};
use super::{FeatureDims, ModelParameters, Trainable};
use crate::chunking::{chunk_sentence, ChunkConfig, PaddedChunk};
use crate::corpus::{build_vocab, parse_corpus};
use crate::features::WordVectors;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Denominator floor for the relative error, so coordinates whose true
    /// gradient is ~0 are judged on an absolute scale.
    pub floor: f64,
    /// Coordinates checked per tensor; smaller tensors are checked whole.
    pub max_coords: usize,
    pub seed: u64,
    /// Fixed dropout masks to check the training-mode graph.
    pub masks: Option<DropoutMasks>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-5,
            max_coords: 64,
            seed: 0,
            masks: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorStatus {
    Passed,
    Failed,
    /// Frozen tensor, nothing to check.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub status: TensorStatus,
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(row, col, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub loss: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.status != TensorStatus::Failed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TensorCheck> {
        self.tensors
            .iter()
            .filter(|t| t.status == TensorStatus::Failed)
    }

    pub fn status_of(&self, name: &str) -> Option<TensorStatus> {
        self.tensors.iter().find(|t| t.name == name).map(|t| t.status)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.tensors.iter().map(|t| t.name.len()).max().unwrap_or(0);
        writeln!(f, "loss {:.12}", self.loss)?;
        for t in &self.tensors {
            let status = match t.status {
                TensorStatus::Passed => "PASS",
                TensorStatus::Failed => "FAIL",
                TensorStatus::Skipped => "SKIP",
            };
            write!(f, "{status} {:<width$}", t.name)?;
            if t.status != TensorStatus::Skipped {
                write!(f, "  coords {:>4}  max rel err {:.3e}", t.checked, t.max_rel_error)?;
            }
            if let (TensorStatus::Failed, Some((r, c, a, n))) = (t.status, t.worst) {
                write!(f, "  worst [{r},{c}] analytic {a:.9e} numeric {n:.9e}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GradCheckError {
    #[error("loss is not finite at the unperturbed parameters")]
    NonFiniteBase,
    #[error("loss became non-finite perturbing {tensor}[{index}]")]
    NonFinitePerturbed { tensor: String, index: usize },
}

/// Compares [`backward`] against central differences of the chunk loss.
pub fn finite_difference_check(
    model: &ModelParameters,
    chunk: &PaddedChunk,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, GradCheckError> {
    finite_difference_check_with(model, chunk, opts, |m, c, masks| backward(m, c, masks).1)
}

/// Same as [`finite_difference_check`] with a caller-supplied analytic
/// gradient, which lets tests confirm that a broken gradient is caught.
pub fn finite_difference_check_with<F>(
    model: &ModelParameters,
    chunk: &PaddedChunk,
    opts: &GradCheckOptions,
    analytic: F,
) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&ModelParameters, &PaddedChunk, Option<&DropoutMasks>) -> ModelParameters,
{
    let masks = opts.masks.as_ref();
    let loss_at = |m: &ModelParameters| chunk_loss(&forward_chunk(m, chunk, masks), chunk);
    let loss = loss_at(model);
    if !loss.is_finite() {
        return Err(GradCheckError::NonFiniteBase);
    }
    let grads = analytic(model, chunk, masks);
    let mut probe = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        loss,
        tensors: Vec::new(),
    };

    for (k, named) in model.tensors().iter().enumerate() {
        if named.trainable == Trainable::Frozen {
            report.tensors.push(TensorCheck {
                name: named.name.clone(),
                status: TensorStatus::Skipped,
                checked: 0,
                max_rel_error: 0.0,
                worst: None,
            });
            continue;
        }
        let analytic_t = grads.tensors()[k].tensor.clone();
        let coords = pick_coords(named.tensor.len(), named.trainable, named.tensor, &analytic_t, opts, &mut rng);
        let cols = named.tensor.cols();
        let mut check = TensorCheck {
            name: named.name.clone(),
            status: TensorStatus::Passed,
            checked: coords.len(),
            max_rel_error: 0.0,
            worst: None,
        };
        for i in coords {
            let original = named.tensor.data()[i];
            let mut perturbed = |value: f64| {
                probe.tensors_mut()[k].tensor.data_mut()[i] = value;
                loss_at(&probe)
            };
            let plus = perturbed(original + opts.step);
            let minus = perturbed(original - opts.step);
            probe.tensors_mut()[k].tensor.data_mut()[i] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(GradCheckError::NonFinitePerturbed {
                    tensor: named.name.clone(),
                    index: i,
                });
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic_t.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            if rel > check.max_rel_error || check.worst.is_none() {
                check.max_rel_error = check.max_rel_error.max(rel);
                check.worst = Some((i / cols, i % cols, a, numeric));
            }
        }
        if check.max_rel_error >= opts.tolerance {
            check.status = TensorStatus::Failed;
        }
        report.tensors.push(check);
    }
    Ok(report)
}

/// Tiny model and a five-token chunk for checking gradients: hidden 4,
/// word dimension 4, POS dimension 2, two character filters of width 3.
pub fn gradcheck_fixture(seed: u64, fine_tune_words: bool) -> (ModelParameters, PaddedChunk) {
    let corpus = parse_corpus("the DT O\nPt NN O\nhas VBZ O\nDM2 NN B\ncontrolled JJ I\n".as_bytes())
        .expect("fixture parses");
    let vocab = build_vocab(&corpus, 1);
    let dims = FeatureDims {
        pos_dim: 2,
        char_dim: 3,
        char_widths: vec![3],
        char_filters: 2,
        hidden: 4,
        fine_tune_words,
    };
    let mut vectors = WordVectors::new(4);
    vectors.vectors.insert("has".into(), vec![0.3, -0.2, 0.1, 0.05]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = ModelParameters::init(&vocab, &vectors, &dims, &mut rng);
    let chunk = chunk_sentence(&corpus.sentences[0], &vocab, &ChunkConfig::default()).remove(0);
    (model, chunk)
}

/// Every trainable coordinate when there are few; otherwise half drawn
/// from coordinates with a nonzero analytic gradient and half uniformly.
fn pick_coords(
    len: usize,
    trainable: Trainable,
    tensor: &crate::tensor::Tensor,
    analytic: &crate::tensor::Tensor,
    opts: &GradCheckOptions,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let allowed: Vec<usize> = (0..len).filter(|&i| trainable.allows(tensor, i)).collect();
    if allowed.len() <= opts.max_coords {
        return allowed;
    }
    let active: Vec<usize> = allowed
        .iter()
        .copied()
        .filter(|&i| analytic.data()[i] != 0.0)
        .collect();
    let mut picked: Vec<usize> = active
        .choose_multiple(rng, opts.max_coords / 2)
        .copied()
        .collect();
    let rest: Vec<usize> = allowed.into_iter().filter(|i| !picked.contains(i)).collect();
    let need = opts.max_coords - picked.len();
    picked.extend(rest.choose_multiple(rng, need).copied());
    picked.sort_unstable();
    picked
}
