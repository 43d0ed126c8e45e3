use std::collections::HashMap;

use super::{AnnotatedCorpus, EMPTY_PLACEHOLDER};

pub const PAD: usize = 0;
pub const UNK: usize = 1;

const PAD_WORD: &str = "<pad>";
const UNK_WORD: &str = "<unk>";
const PAD_CHAR: char = '\u{0}';
const UNK_CHAR: char = '\u{1}';

/// Dense string-to-index map with PAD at 0 and UNK at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Index<K: Eq + std::hash::Hash> {
    items: Vec<K>,
    lookup: HashMap<K, usize>,
}

impl<K: Clone + Eq + std::hash::Hash> Index<K> {
    fn with_reserved(pad: K, unk: K) -> Self {
        let mut idx = Index {
            items: Vec::new(),
            lookup: HashMap::new(),
        };
        idx.insert(pad);
        idx.insert(unk);
        idx
    }

    fn insert(&mut self, key: K) -> usize {
        if let Some(&i) = self.lookup.get(&key) {
            return i;
        }
        let i = self.items.len();
        self.lookup.insert(key.clone(), i);
        self.items.push(key);
        i
    }

    pub fn get<Q>(&self, key: &Q) -> usize
    where
        K: std::borrow::Borrow<Q>,
        Q: std::hash::Hash + Eq + ?Sized,
    {
        self.lookup.get(key).copied().unwrap_or(UNK)
    }

    pub fn contains<Q>(&self, key: &Q) -> bool
    where
        K: std::borrow::Borrow<Q>,
        Q: std::hash::Hash + Eq + ?Sized,
    {
        self.lookup.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Entries in index order, reserved ones included.
    pub fn items(&self) -> &[K] {
        &self.items
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Index<String>,
    pub pos: Index<String>,
    pub chars: Index<char>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            words: Index::with_reserved(PAD_WORD.into(), UNK_WORD.into()),
            pos: Index::with_reserved(PAD_WORD.into(), UNK_WORD.into()),
            chars: Index::with_reserved(PAD_CHAR, UNK_CHAR),
        }
    }
}

impl Vocabulary {
    pub fn word(&self, surface: &str) -> usize {
        self.words.get(surface)
    }

    pub fn pos_tag(&self, pos: &str) -> usize {
        self.pos.get(pos)
    }

    /// Character indices of a normalized surface form. The placeholder for
    /// empty tokens maps to a single UNK character.
    pub fn chars_of(&self, surface: &str) -> Vec<usize> {
        if surface == EMPTY_PLACEHOLDER {
            return vec![UNK];
        }
        surface.chars().map(|c| self.chars.get(&c)).collect()
    }

    /// Rebuilds a vocabulary from its entries in index order. The first two
    /// entries of each list must be the reserved PAD and UNK entries.
    pub fn from_entries(
        words: Vec<String>,
        pos: Vec<String>,
        chars: Vec<char>,
    ) -> Option<Vocabulary> {
        let mut v = Vocabulary::default();
        if words.get(..2)? != v.words.items()
            || pos.get(..2)? != v.pos.items()
            || chars.get(..2)? != v.chars.items()
        {
            return None;
        }
        for w in words.into_iter().skip(2) {
            v.words.insert(w);
        }
        for p in pos.into_iter().skip(2) {
            v.pos.insert(p);
        }
        for c in chars.into_iter().skip(2) {
            v.chars.insert(c);
        }
        Some(v)
    }

    /// Registers a word regardless of frequency.
    pub fn add_word(&mut self, word: &str) -> usize {
        self.words.insert(word.to_string())
    }
}

/// Indexes words seen at least `min_count` times, plus every POS tag and
/// character. Indices are assigned in first-occurrence order.
pub fn build_vocab(corpus: &AnnotatedCorpus, min_count: usize) -> Vocabulary {
    let min_count = min_count.max(1);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    let mut vocab = Vocabulary::default();
    for token in corpus.sentences.iter().flat_map(|s| &s.tokens) {
        vocab.pos.insert(token.pos.clone());
        if token.surface == EMPTY_PLACEHOLDER {
            continue;
        }
        for c in token.surface.chars() {
            vocab.chars.insert(c);
        }
        let n = counts.entry(token.surface.as_str()).or_insert(0);
        if *n == 0 {
            order.push(token.surface.as_str());
        }
        *n += 1;
    }
    for w in order {
        if counts[w] >= min_count {
            vocab.words.insert(w.to_string());
        }
    }
    vocab
}
