//! Per-token input features: a word vector, a trainable POS embedding and
//! a character-CNN summary, concatenated into one row per token.

use std::collections::HashMap;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunking::PaddedChunk;
use crate::corpus::{normalize_token, Vocabulary, PAD, UNK};
use crate::tensor::{dot, Tensor};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line 1: malformed header, expected `<count> <dim>`")]
    Header,
    #[error("line {line}: expected {expected} values, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {value:?} is not a finite number")]
    Value { line: usize, value: String },
    #[error("line {line}: {source}")]
    Io {
        line: usize,
        source: std::io::Error,
    },
}

/// Contents of a word2vec-style text file, keyed by normalized word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Self {
        WordVectors {
            dim,
            vectors: HashMap::new(),
        }
    }
}

pub fn parse_word_vectors<R: BufRead>(reader: R) -> Result<WordVectors, EmbeddingError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|source| EmbeddingError::Io { line: 1, source })?,
        None => return Err(EmbeddingError::Header),
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| EmbeddingError::Header)?;
    let dim = match dims.as_slice() {
        [_, d] if *d > 0 => *d,
        _ => return Err(EmbeddingError::Header),
    };
    let mut out = WordVectors::new(dim);
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|source| EmbeddingError::Io {
            line: lineno,
            source,
        })?;
        let mut cols = line.split_whitespace();
        let Some(word) = cols.next() else { continue };
        let values: Vec<&str> = cols.collect();
        if values.len() != dim {
            return Err(EmbeddingError::Dimension {
                line: lineno,
                expected: dim,
                found: values.len(),
            });
        }
        let mut v = Vec::with_capacity(dim);
        for s in values {
            match s.parse::<f64>() {
                Ok(x) if x.is_finite() => v.push(x),
                _ => {
                    return Err(EmbeddingError::Value {
                        line: lineno,
                        value: s.to_string(),
                    })
                }
            }
        }
        out.vectors.entry(normalize_token(word)).or_insert(v);
    }
    Ok(out)
}

/// Deterministic vector for a word with no pretrained row, uniform in
/// `[-0.5/dim, 0.5/dim]` and seeded from a SHA-256 of the word.
pub fn hashed_vector(word: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(word.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    let limit = 0.5 / dim as f64;
    (0..dim).map(|_| rng.gen_range(-limit..=limit)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// `V x D_w`, row 0 is PAD and stays zero.
    pub matrix: Tensor,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn from_vectors(vectors: &WordVectors, vocab: &Vocabulary) -> Self {
        let dim = vectors.dim;
        let mut matrix = Tensor::zeros(vocab.words.len(), dim);
        for (i, word) in vocab.words.items().iter().enumerate().skip(1) {
            let row = match vectors.vectors.get(word) {
                Some(v) => v.clone(),
                None => hashed_vector(word, dim),
            };
            matrix.row_mut(i).copy_from_slice(&row);
        }
        EmbeddingTable {
            matrix,
            trainable: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn lookup(&self, index: usize) -> &[f64] {
        self.matrix.row(index.min(self.matrix.rows() - 1))
    }
}

/// Parses an embedding file and lays it out for `vocab`.
pub fn load_embeddings<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
) -> Result<EmbeddingTable, EmbeddingError> {
    Ok(EmbeddingTable::from_vectors(&parse_word_vectors(reader)?, vocab))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosEmbedding {
    /// `P x D_p`, row 0 is PAD and stays zero.
    pub matrix: Tensor,
}

impl PosEmbedding {
    pub fn init<R: Rng + ?Sized>(tags: usize, dim: usize, rng: &mut R) -> Self {
        let mut matrix = Tensor::glorot(tags, dim, rng);
        matrix.row_mut(PAD).fill(0.0);
        PosEmbedding { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// Filters of one kernel width, `F x (width * D_c)`: row `f` holds the
/// kernel for filter `f` laid out position-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CharConv {
    pub width: usize,
    pub filters: Tensor,
    /// `F x 1`
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharCnnParams {
    /// `C x D_c`, row 0 is PAD and stays zero.
    pub table: Tensor,
    pub convs: Vec<CharConv>,
}

impl CharCnnParams {
    pub fn init<R: Rng + ?Sized>(
        chars: usize,
        char_dim: usize,
        widths: &[usize],
        filters: usize,
        rng: &mut R,
    ) -> Self {
        let mut table = Tensor::glorot(chars, char_dim, rng);
        table.row_mut(PAD).fill(0.0);
        let convs = widths
            .iter()
            .map(|&width| CharConv {
                width,
                filters: Tensor::glorot(filters, width * char_dim, rng),
                bias: Tensor::zeros(filters, 1),
            })
            .collect();
        CharCnnParams { table, convs }
    }

    pub fn char_dim(&self) -> usize {
        self.table.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.convs.iter().map(|c| c.filters.rows()).sum()
    }
}

/// Which window won the max-pool for each filter, kept for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct CharTrace {
    /// Per conv: the (left-padded) character sequence that was convolved.
    pub sequences: Vec<Vec<usize>>,
    /// Per conv, per filter: start of the winning window and its
    /// pre-activation.
    pub winners: Vec<Vec<(usize, f64)>>,
}

fn prepare(chars: &[usize], width: usize, table_rows: usize) -> Vec<usize> {
    let real = chars.iter().rposition(|&c| c != PAD).map_or(0, |p| p + 1);
    let mut seq: Vec<usize> = chars[..real]
        .iter()
        .map(|&c| if c >= table_rows { UNK } else { c })
        .collect();
    if seq.len() < width {
        let mut padded = vec![PAD; width - seq.len()];
        padded.append(&mut seq);
        seq = padded;
    }
    seq
}

pub fn char_cnn_forward_traced(chars: &[usize], params: &CharCnnParams) -> (Vec<f64>, CharTrace) {
    let d = params.char_dim();
    let mut out = Vec::with_capacity(params.output_dim());
    let mut trace = CharTrace {
        sequences: Vec::with_capacity(params.convs.len()),
        winners: Vec::with_capacity(params.convs.len()),
    };
    for conv in &params.convs {
        let seq = prepare(chars, conv.width, params.table.rows());
        let windows = seq.len() - conv.width + 1;
        // gather each window's embedded characters once
        let mut stacked = vec![0.0; conv.width * d];
        let mut best = vec![(0usize, f64::NEG_INFINITY); conv.filters.rows()];
        for start in 0..windows {
            for k in 0..conv.width {
                stacked[k * d..(k + 1) * d].copy_from_slice(params.table.row(seq[start + k]));
            }
            for (f, slot) in best.iter_mut().enumerate() {
                let pre = dot(conv.filters.row(f), &stacked) + conv.bias.get(f, 0);
                if pre > slot.1 {
                    *slot = (start, pre);
                }
            }
        }
        out.extend(best.iter().map(|&(_, pre)| pre.max(0.0)));
        trace.sequences.push(seq);
        trace.winners.push(best);
    }
    (out, trace)
}

/// Convolution, bias, ReLU and max-over-time pooling for every filter of
/// every width, concatenated. Trailing PAD characters are ignored.
pub fn char_cnn_forward(chars: &[usize], params: &CharCnnParams) -> Vec<f64> {
    char_cnn_forward_traced(chars, params).0
}

/// Accumulates gradients of the char-CNN output into `grads`.
pub fn char_cnn_backward(
    trace: &CharTrace,
    grad_out: &[f64],
    params: &CharCnnParams,
    grads: &mut CharCnnParams,
) {
    let d = params.char_dim();
    let mut offset = 0;
    for (c, conv) in params.convs.iter().enumerate() {
        let seq = &trace.sequences[c];
        for (f, &(start, pre)) in trace.winners[c].iter().enumerate() {
            let g = grad_out[offset + f];
            // ReLU is flat below zero
            if g == 0.0 || pre <= 0.0 {
                continue;
            }
            grads.convs[c].bias.data_mut()[f] += g;
            let kernel = conv.filters.row(f);
            for k in 0..conv.width {
                let ch = seq[start + k];
                let emb = params.table.row(ch);
                let gk = &mut grads.convs[c].filters.row_mut(f)[k * d..(k + 1) * d];
                gk.iter_mut().zip(emb).for_each(|(a, e)| *a += g * e);
                let gt = grads.table.row_mut(ch);
                gt.iter_mut()
                    .zip(&kernel[k * d..(k + 1) * d])
                    .for_each(|(a, w)| *a += g * w);
            }
        }
        offset += conv.filters.rows();
    }
}

/// `window x D` input rows for one chunk; pad rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Tensor,
    pub mask: Vec<bool>,
}

impl FeatureMatrix {
    pub fn real_len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m).count()
    }
}

pub fn featurize_chunk_traced(
    chunk: &PaddedChunk,
    word_table: &EmbeddingTable,
    pos_table: &PosEmbedding,
    char_params: &CharCnnParams,
) -> (FeatureMatrix, Vec<CharTrace>) {
    let (dw, dp) = (word_table.dim(), pos_table.dim());
    let dim = dw + dp + char_params.output_dim();
    let mut rows = Tensor::zeros(chunk.window(), dim);
    let mut traces = Vec::with_capacity(chunk.real_len());
    for t in 0..chunk.real_len() {
        let row = rows.row_mut(t);
        row[..dw].copy_from_slice(word_table.lookup(chunk.words[t]));
        let p = chunk.pos[t].min(pos_table.matrix.rows() - 1);
        row[dw..dw + dp].copy_from_slice(pos_table.matrix.row(p));
        let (c, trace) = char_cnn_forward_traced(&chunk.chars[t], char_params);
        row[dw + dp..].copy_from_slice(&c);
        traces.push(trace);
    }
    (
        FeatureMatrix {
            rows,
            mask: chunk.mask.clone(),
        },
        traces,
    )
}

/// Builds `v_t = word ⊕ pos ⊕ chars` for every real slot of the chunk.
pub fn featurize_chunk(
    chunk: &PaddedChunk,
    word_table: &EmbeddingTable,
    pos_table: &PosEmbedding,
    char_params: &CharCnnParams,
) -> FeatureMatrix {
    featurize_chunk_traced(chunk, word_table, pos_table, char_params).0
}
