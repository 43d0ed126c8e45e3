//! Numeric core of the tagger: GRU cells composed into a bidirectional
//! encoder, a dense softmax head, masked cross-entropy, hand-written
//! backpropagation, dropout, gradient clipping and Adam.
//!
//! # Phase separation
//!
//! [`forward_chunk`] and [`backward_chunk`] only read the parameters, so
//! any number of chunks can be processed concurrently against one frozen
//! snapshot (`&ModelParameters` is `Sync`). Their gradients are plain
//! [`ModelParameters`] values that add up commutatively. Updating the
//! parameters ([`adam_step`]) needs `&mut ModelParameters`, which the
//! borrow checker keeps exclusive of every outstanding forward/backward
//! borrow.

mod dropout;
mod gradcheck;
mod gru;
mod model;
mod optim;
mod output;

pub use dropout::{apply_dropout, dropout_mask, DropoutMasks};
pub use gradcheck::{
    finite_difference_check, finite_difference_check_with, gradcheck_fixture, GradCheckError, GradCheckOptions,
    GradCheckReport, TensorCheck, TensorStatus,
};
pub use gru::{bigru_forward, gru_cell_forward, GruDirectionParams, GruStep};
pub use model::{backward, backward_chunk, chunk_loss, forward_chunk, ChunkPass};
pub use optim::{adam_step, clip_gradients, global_norm, AdamState};
pub use output::{dense_softmax, masked_cross_entropy, softmax, DenseParams, TagDistribution};

use rand::Rng;

use crate::corpus::{Vocabulary, PAD};
use crate::features::{CharCnnParams, CharConv, EmbeddingTable, PosEmbedding, WordVectors};
use crate::tensor::Tensor;

/// Sizes fixed at model construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDims {
    pub words: usize,
    pub pos_tags: usize,
    pub chars: usize,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub char_dim: usize,
    pub char_widths: Vec<usize>,
    pub char_filters: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn char_output_dim(&self) -> usize {
        self.char_filters * self.char_widths.len()
    }

    /// Width of a feature row `v_t`.
    pub fn input_dim(&self) -> usize {
        self.word_dim + self.pos_dim + self.char_output_dim()
    }
}

/// Which coordinates of a tensor the optimizer may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainable {
    All,
    /// Every row except row 0 (PAD).
    AllButPadRow,
    Frozen,
}

impl Trainable {
    pub fn allows(self, tensor: &Tensor, flat_index: usize) -> bool {
        match self {
            Trainable::All => true,
            Trainable::AllButPadRow => flat_index / tensor.cols() != PAD,
            Trainable::Frozen => false,
        }
    }
}

pub struct NamedTensor<'a> {
    pub name: String,
    pub tensor: &'a Tensor,
    pub trainable: Trainable,
}

pub struct NamedTensorMut<'a> {
    pub name: String,
    pub tensor: &'a mut Tensor,
    pub trainable: Trainable,
}

/// Every trainable (and frozen) tensor of the tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub word: EmbeddingTable,
    pub pos: PosEmbedding,
    pub chars: CharCnnParams,
    pub forward: GruDirectionParams,
    pub backward: GruDirectionParams,
    pub dense: DenseParams,
}

impl ModelParameters {
    /// Glorot-initialized weights and zero biases. The word table comes
    /// from `vectors` laid out for `vocab`.
    pub fn init<R: Rng + ?Sized>(
        vocab: &Vocabulary,
        vectors: &WordVectors,
        dims: &FeatureDims,
        rng: &mut R,
    ) -> Self {
        let mut word = EmbeddingTable::from_vectors(vectors, vocab);
        word.trainable = dims.fine_tune_words;
        let pos = PosEmbedding::init(vocab.pos.len(), dims.pos_dim, rng);
        let chars = CharCnnParams::init(
            vocab.chars.len(),
            dims.char_dim,
            &dims.char_widths,
            dims.char_filters,
            rng,
        );
        let input = word.dim() + dims.pos_dim + chars.output_dim();
        let forward = GruDirectionParams::init(input, dims.hidden, rng);
        let backward = GruDirectionParams::init(input, dims.hidden, rng);
        let dense = DenseParams::init(2 * dims.hidden, rng);
        ModelParameters {
            word,
            pos,
            chars,
            forward,
            backward,
            dense,
        }
    }

    /// All-zero parameters of the given shape.
    pub fn zeros(dims: &ModelDims, word_trainable: bool) -> Self {
        let input = dims.input_dim();
        ModelParameters {
            word: EmbeddingTable {
                matrix: Tensor::zeros(dims.words, dims.word_dim),
                trainable: word_trainable,
            },
            pos: PosEmbedding {
                matrix: Tensor::zeros(dims.pos_tags, dims.pos_dim),
            },
            chars: CharCnnParams {
                table: Tensor::zeros(dims.chars, dims.char_dim),
                convs: dims
                    .char_widths
                    .iter()
                    .map(|&width| CharConv {
                        width,
                        filters: Tensor::zeros(dims.char_filters, width * dims.char_dim),
                        bias: Tensor::zeros(dims.char_filters, 1),
                    })
                    .collect(),
            },
            forward: GruDirectionParams::zeros(input, dims.hidden),
            backward: GruDirectionParams::zeros(input, dims.hidden),
            dense: DenseParams::zeros(2 * dims.hidden),
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            words: self.word.matrix.rows(),
            pos_tags: self.pos.matrix.rows(),
            chars: self.chars.table.rows(),
            word_dim: self.word.dim(),
            pos_dim: self.pos.dim(),
            char_dim: self.chars.char_dim(),
            char_widths: self.chars.convs.iter().map(|c| c.width).collect(),
            char_filters: self.chars.convs.first().map_or(0, |c| c.filters.rows()),
            hidden: self.forward.hidden(),
        }
    }

    /// Same shapes and flags, every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.tensor.fill(0.0);
        }
        z
    }

    pub fn tensors(&self) -> Vec<NamedTensor<'_>> {
        let word_trainable = if self.word.trainable {
            Trainable::AllButPadRow
        } else {
            Trainable::Frozen
        };
        let mut out = vec![
            NamedTensor {
                name: "word_embeddings".into(),
                tensor: &self.word.matrix,
                trainable: word_trainable,
            },
            NamedTensor {
                name: "pos_embeddings".into(),
                tensor: &self.pos.matrix,
                trainable: Trainable::AllButPadRow,
            },
            NamedTensor {
                name: "char_embeddings".into(),
                tensor: &self.chars.table,
                trainable: Trainable::AllButPadRow,
            },
        ];
        for conv in &self.chars.convs {
            out.push(NamedTensor {
                name: format!("char_filters_w{}", conv.width),
                tensor: &conv.filters,
                trainable: Trainable::All,
            });
            out.push(NamedTensor {
                name: format!("char_bias_w{}", conv.width),
                tensor: &conv.bias,
                trainable: Trainable::All,
            });
        }
        for (prefix, gru) in [("gru_fwd", &self.forward), ("gru_bwd", &self.backward)] {
            for (name, tensor) in gru.named() {
                out.push(NamedTensor {
                    name: format!("{prefix}.{name}"),
                    tensor,
                    trainable: Trainable::All,
                });
            }
        }
        out.push(NamedTensor {
            name: "dense.weights".into(),
            tensor: &self.dense.weights,
            trainable: Trainable::All,
        });
        out.push(NamedTensor {
            name: "dense.bias".into(),
            tensor: &self.dense.bias,
            trainable: Trainable::All,
        });
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<NamedTensorMut<'_>> {
        let word_trainable = if self.word.trainable {
            Trainable::AllButPadRow
        } else {
            Trainable::Frozen
        };
        let mut out = vec![
            NamedTensorMut {
                name: "word_embeddings".into(),
                tensor: &mut self.word.matrix,
                trainable: word_trainable,
            },
            NamedTensorMut {
                name: "pos_embeddings".into(),
                tensor: &mut self.pos.matrix,
                trainable: Trainable::AllButPadRow,
            },
            NamedTensorMut {
                name: "char_embeddings".into(),
                tensor: &mut self.chars.table,
                trainable: Trainable::AllButPadRow,
            },
        ];
        for conv in &mut self.chars.convs {
            let w = conv.width;
            out.push(NamedTensorMut {
                name: format!("char_filters_w{w}"),
                tensor: &mut conv.filters,
                trainable: Trainable::All,
            });
            out.push(NamedTensorMut {
                name: format!("char_bias_w{w}"),
                tensor: &mut conv.bias,
                trainable: Trainable::All,
            });
        }
        for (prefix, gru) in [
            ("gru_fwd", &mut self.forward),
            ("gru_bwd", &mut self.backward),
        ] {
            for (name, tensor) in gru.named_mut() {
                out.push(NamedTensorMut {
                    name: format!("{prefix}.{name}"),
                    tensor,
                    trainable: Trainable::All,
                });
            }
        }
        out.push(NamedTensorMut {
            name: "dense.weights".into(),
            tensor: &mut self.dense.weights,
            trainable: Trainable::All,
        });
        out.push(NamedTensorMut {
            name: "dense.bias".into(),
            tensor: &mut self.dense.bias,
            trainable: Trainable::All,
        });
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.tensor.is_finite())
    }

    /// `self += other`, tensor by tensor.
    pub fn accumulate(&mut self, other: &ModelParameters) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.tensor.add_assign(b.tensor);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.tensor.scale(k);
        }
    }
}

/// Feature and recurrent sizes that are not implied by the vocabulary or
/// the embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDims {
    pub pos_dim: usize,
    pub char_dim: usize,
    pub char_widths: Vec<usize>,
    pub char_filters: usize,
    pub hidden: usize,
    /// Fine-tune the word table instead of keeping it static.
    pub fine_tune_words: bool,
}

impl Default for FeatureDims {
    fn default() -> Self {
        FeatureDims {
            pos_dim: 16,
            char_dim: 24,
            char_widths: vec![3],
            char_filters: 32,
            hidden: 128,
            fine_tune_words: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, parse_corpus};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dims_match_tensor_shapes() {
        let v = build_vocab(&parse_corpus("a X O\nbb Y B\n".as_bytes()).unwrap(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dims = FeatureDims {
            hidden: 5,
            ..FeatureDims::default()
        };
        let m = ModelParameters::init(&v, &WordVectors::new(8), &dims, &mut rng);
        let d = m.dims();
        assert_eq!(d.input_dim(), 8 + 16 + 32);
        assert_eq!(m.forward.w_z.shape(), (5, d.input_dim()));
        assert_eq!(m.forward.u_h.shape(), (5, 5));
        assert_eq!(m.dense.weights.shape(), (3, 10));
        assert_eq!(m.tensors().len(), 3 + 2 + 9 * 2 + 2);
        assert!(m.pos.matrix.row(PAD).iter().all(|&x| x == 0.0));
        assert!(m.chars.table.row(PAD).iter().all(|&x| x == 0.0));
        assert!(m.word.matrix.row(PAD).iter().all(|&x| x == 0.0));
        let z = m.zeros_like();
        assert!(z.tensors().iter().all(|t| t.tensor.data().iter().all(|&x| x == 0.0)));
    }
}
