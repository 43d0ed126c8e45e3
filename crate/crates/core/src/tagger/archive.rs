//! Binary model archive.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! magic "CTAGGER\0" | version | window overlap
//! | words | pos tags | chars              (vocabulary, index order)
//! | word_dim pos_dim char_dim n_widths widths.. char_filters hidden
//! | word_trainable (u8)
//! | n_tensors { name rows cols f64 x rows*cols }
//! | SHA-256 of everything above
//! ```
//!
//! Strings are a length followed by UTF-8 bytes; characters are Unicode
//! scalar values.

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::Tagger;
use crate::chunking::ChunkConfig;
use crate::corpus::Vocabulary;
use crate::neural::{ModelDims, ModelParameters};

pub const MAGIC: &[u8; 8] = b"CTAGGER\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER: usize = 12;
const CHECKSUM: usize = 32;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("not a model archive (bad magic)")]
    BadMagic,
    #[error("unsupported archive version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("archive checksum mismatch (truncated or corrupted)")]
    Checksum,
    #[error("malformed archive: {0}")]
    Format(String),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, x: usize) {
        let x = u32::try_from(x).expect("archive field exceeds u32");
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

/// Serializes a tagger to archive bytes.
pub fn write_model(tagger: &Tagger) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    w.u32(tagger.chunk.window);
    w.u32(tagger.chunk.overlap);
    let v = &tagger.vocab;
    w.u32(v.words.len());
    v.words.items().iter().for_each(|s| w.str(s));
    w.u32(v.pos.len());
    v.pos.items().iter().for_each(|s| w.str(s));
    w.u32(v.chars.len());
    v.chars.items().iter().for_each(|&c| w.u32(c as usize));

    let d = tagger.params.dims();
    for x in [d.word_dim, d.pos_dim, d.char_dim, d.char_widths.len()] {
        w.u32(x);
    }
    d.char_widths.iter().for_each(|&x| w.u32(x));
    w.u32(d.char_filters);
    w.u32(d.hidden);
    w.0.push(u8::from(tagger.params.word.trainable));

    let tensors = tagger.params.tensors();
    w.u32(tensors.len());
    for t in &tensors {
        w.str(&t.name);
        w.u32(t.tensor.rows());
        w.u32(t.tensor.cols());
        for x in t.tensor.data() {
            w.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArchiveError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ArchiveError::Format("unexpected end of data".into()))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize, ArchiveError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn str(&mut self) -> Result<String, ArchiveError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| ArchiveError::Format("invalid UTF-8 string".into()))
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, ArchiveError>) -> Result<Vec<T>, ArchiveError> {
        let n = self.u32()?;
        (0..n).map(|_| item(self)).collect()
    }
}

/// Parses archive bytes. The version is checked before the checksum so a
/// newer format is reported as such rather than as corruption.
pub fn read_model(bytes: &[u8]) -> Result<Tagger, ArchiveError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ArchiveError::BadMagic);
    }
    if bytes.len() < HEADER + CHECKSUM {
        return Err(ArchiveError::Checksum);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ArchiveError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM);
    if Sha256::digest(body).as_slice() != stored {
        return Err(ArchiveError::Checksum);
    }

    let mut r = Reader { bytes: body, at: HEADER };
    let window = r.u32()?;
    let overlap = r.u32()?;
    let chunk = ChunkConfig::new(window, overlap).map_err(|e| ArchiveError::Format(e.to_string()))?;
    let words = r.list(Reader::str)?;
    let pos = r.list(Reader::str)?;
    let chars = r.list(|r| {
        let x = r.u32()? as u32;
        char::from_u32(x).ok_or_else(|| ArchiveError::Format(format!("invalid character {x:#x}")))
    })?;
    let (n_words, n_pos, n_chars) = (words.len(), pos.len(), chars.len());
    let vocab = Vocabulary::from_entries(words, pos, chars)
        .ok_or_else(|| ArchiveError::Format("vocabulary lacks reserved entries".into()))?;
    if (vocab.words.len(), vocab.pos.len(), vocab.chars.len()) != (n_words, n_pos, n_chars) {
        return Err(ArchiveError::Format("duplicate vocabulary entries".into()));
    }

    let word_dim = r.u32()?;
    let pos_dim = r.u32()?;
    let char_dim = r.u32()?;
    let char_widths = r.list(Reader::u32)?;
    let char_filters = r.u32()?;
    let hidden = r.u32()?;
    let word_trainable = match r.take(1)?[0] {
        0 => false,
        1 => true,
        b => return Err(ArchiveError::Format(format!("bad trainable flag {b}"))),
    };
    let dims = ModelDims {
        words: n_words,
        pos_tags: n_pos,
        chars: n_chars,
        word_dim,
        pos_dim,
        char_dim,
        char_widths,
        char_filters,
        hidden,
    };
    let mut params = ModelParameters::zeros(&dims, word_trainable);
    let count = r.u32()?;
    let mut slots = params.tensors_mut();
    if count != slots.len() {
        return Err(ArchiveError::Format(format!(
            "{count} tensors stored, {} expected",
            slots.len()
        )));
    }
    for slot in &mut slots {
        let name = r.str()?;
        let (rows, cols) = (r.u32()?, r.u32()?);
        if name != slot.name || (rows, cols) != slot.tensor.shape() {
            return Err(ArchiveError::Format(format!(
                "tensor {name} {rows}x{cols} does not match {} {:?}",
                slot.name,
                slot.tensor.shape()
            )));
        }
        let raw = r.take(rows * cols * 8)?;
        for (x, b) in slot.tensor.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *x = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        }
    }
    drop(slots);
    if r.at != body.len() {
        return Err(ArchiveError::Format("trailing bytes after tensors".into()));
    }
    Ok(Tagger { params, vocab, chunk })
}

pub fn save_model(tagger: &Tagger, path: impl AsRef<Path>) -> Result<(), ArchiveError> {
    let path = path.as_ref();
    fs::write(path, write_model(tagger)).map_err(|source| ArchiveError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Tagger, ArchiveError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ArchiveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_model(&bytes)
}
