//! Fixed-width overlapping windows over sentences, and reconciliation of
//! per-window predictions back onto the sentence.
//!
//! Chunk `i` starts at token `i * (window - overlap)`. The final chunk is
//! right-padded up to `window` slots, so real slots are always a prefix.

use thiserror::Error;

use crate::corpus::{AnnotatedSentence, Label, Vocabulary, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub window: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            window: 19,
            overlap: 2,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("chunk overlap {overlap} must satisfy 0 < overlap < window ({window})")]
    InvalidConfig { window: usize, overlap: usize },
    #[error("no chunks to merge")]
    Empty,
    #[error("expected chunk ordinal {expected}, found {found}")]
    MissingOrdinal { expected: usize, found: usize },
    #[error("chunk {ordinal} has offset {found}, expected {expected}")]
    BadOffset {
        ordinal: usize,
        expected: usize,
        found: usize,
    },
    #[error("chunk {ordinal} carries {found} tags for {expected} real slots")]
    TagCount {
        ordinal: usize,
        expected: usize,
        found: usize,
    },
}

impl ChunkConfig {
    pub fn new(window: usize, overlap: usize) -> Result<Self, ChunkError> {
        let c = ChunkConfig { window, overlap };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.overlap == 0 || self.overlap >= self.window {
            return Err(ChunkError::InvalidConfig {
                window: self.window,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.window - self.overlap
    }
}

/// Number of chunks a sentence of `sentence_len` tokens produces.
pub fn chunk_count(sentence_len: usize, config: &ChunkConfig) -> usize {
    if sentence_len <= config.window {
        1
    } else {
        1 + (sentence_len - config.window).div_ceil(config.stride())
    }
}

/// `(offset, real_len)` of every chunk of a sentence.
pub fn chunk_bounds(sentence_len: usize, config: &ChunkConfig) -> Vec<(usize, usize)> {
    (0..chunk_count(sentence_len, config))
        .map(|i| {
            let offset = i * config.stride();
            (offset, (sentence_len - offset).min(config.window))
        })
        .collect()
}

/// One window of a sentence, already mapped to vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedChunk {
    pub words: Vec<usize>,
    pub pos: Vec<usize>,
    /// Character indices per slot; empty for pad slots.
    pub chars: Vec<Vec<usize>>,
    /// Gold labels; pad slots hold `O` and are never scored.
    pub labels: Vec<Label>,
    /// `true` for real slots.
    pub mask: Vec<bool>,
    pub sentence_offset: usize,
    pub chunk_ordinal: usize,
}

impl PaddedChunk {
    pub fn window(&self) -> usize {
        self.mask.len()
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().take_while(|&&m| m).count()
    }

    /// Copy of this chunk with `extra` pad slots appended.
    pub fn with_extra_padding(&self, extra: usize) -> PaddedChunk {
        let mut c = self.clone();
        c.words.extend(std::iter::repeat_n(PAD, extra));
        c.pos.extend(std::iter::repeat_n(PAD, extra));
        c.chars.extend(std::iter::repeat_n(Vec::new(), extra));
        c.labels.extend(std::iter::repeat_n(Label::O, extra));
        c.mask.extend(std::iter::repeat_n(false, extra));
        c
    }
}

pub fn chunk_sentence(
    sentence: &AnnotatedSentence,
    vocab: &Vocabulary,
    config: &ChunkConfig,
) -> Vec<PaddedChunk> {
    let w = config.window;
    chunk_bounds(sentence.len(), config)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (offset, real))| {
            let mut chunk = PaddedChunk {
                words: vec![PAD; w],
                pos: vec![PAD; w],
                chars: vec![Vec::new(); w],
                labels: vec![Label::O; w],
                mask: vec![false; w],
                sentence_offset: offset,
                chunk_ordinal: ordinal,
            };
            for (slot, token) in sentence.tokens[offset..offset + real].iter().enumerate() {
                chunk.words[slot] = vocab.word(&token.surface);
                chunk.pos[slot] = vocab.pos_tag(&token.pos);
                chunk.chars[slot] = vocab.chars_of(&token.surface);
                chunk.labels[slot] = token.label;
                chunk.mask[slot] = true;
            }
            chunk
        })
        .collect()
}

/// Distance from a local slot to the nearer edge of the chunk's real
/// region.
fn centrality(local: usize, real_len: usize) -> usize {
    local.min(real_len - 1 - local)
}

/// Folds per-chunk tag sequences back onto the sentence.
///
/// A position covered by two chunks takes the tag from the chunk in which
/// it sits farther from the edge; on a tie the earlier chunk wins. Tags on
/// pad slots are ignored.
pub fn merge_chunk_predictions<'a, T, I>(chunks: I) -> Result<Vec<T>, ChunkError>
where
    T: Copy + 'a,
    I: IntoIterator<Item = (&'a PaddedChunk, &'a [T])>,
{
    let mut out: Vec<T> = Vec::new();
    // centrality of the chunk that currently owns each position
    let mut owner: Vec<usize> = Vec::new();
    let mut stride = None;
    let mut seen = 0usize;
    for (chunk, tags) in chunks {
        if chunk.chunk_ordinal != seen {
            return Err(ChunkError::MissingOrdinal {
                expected: seen,
                found: chunk.chunk_ordinal,
            });
        }
        let real = chunk.real_len();
        if tags.len() < real {
            return Err(ChunkError::TagCount {
                ordinal: seen,
                expected: real,
                found: tags.len(),
            });
        }
        if seen == 1 {
            stride = Some(chunk.sentence_offset);
        }
        let expected = stride.map_or(0, |s| s * seen);
        if chunk.sentence_offset != expected || (seen > 0 && chunk.sentence_offset > out.len()) {
            return Err(ChunkError::BadOffset {
                ordinal: seen,
                expected,
                found: chunk.sentence_offset,
            });
        }
        for (local, &tag) in tags[..real].iter().enumerate() {
            let pos = chunk.sentence_offset + local;
            let score = centrality(local, real);
            if pos < out.len() {
                if score > owner[pos] {
                    out[pos] = tag;
                    owner[pos] = score;
                }
            } else {
                out.push(tag);
                owner.push(score);
            }
        }
        seen += 1;
    }
    if seen == 0 {
        return Err(ChunkError::Empty);
    }
    Ok(out)
}
