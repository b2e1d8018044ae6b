//! Integer-id view of a corpus used by the training engines.
//!
//! Sentences are cut at boundary tokens into chunks and identical chunks are
//! stored once with a multiplicity, so counting and merging touch each
//! distinct word only once.

use rustc_hash::FxHashMap;

use crate::model::{SymbolSequence, Token};

pub(crate) type Id = u32;

#[inline]
pub(crate) fn pair_key(left: Id, right: Id) -> u64 {
    (u64::from(left) << 32) | u64::from(right)
}

#[inline]
pub(crate) fn unpack(key: u64) -> (Id, Id) {
    ((key >> 32) as Id, key as Id)
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Interner {
    texts: Vec<String>,
    boundary: Vec<bool>,
    index: FxHashMap<String, Id>,
}

impl Interner {
    pub fn intern(&mut self, text: &str, boundary: bool) -> Id {
        if let Some(&id) = self.index.get(text) {
            return id;
        }
        let id = Id::try_from(self.texts.len()).expect("more than u32::MAX distinct tokens");
        self.texts.push(text.to_owned());
        self.boundary.push(boundary);
        self.index.insert(text.to_owned(), id);
        id
    }

    pub fn intern_token(&mut self, token: &Token) -> Id {
        self.intern(token.text(), token.is_boundary())
    }

    pub fn concat(&mut self, left: Id, right: Id) -> Id {
        let mut text = String::with_capacity(self.text(left).len() + self.text(right).len());
        text.push_str(self.text(left));
        text.push_str(self.text(right));
        self.intern(&text, false)
    }

    pub fn get(&self, text: &str) -> Option<Id> {
        self.index.get(text).copied()
    }

    pub fn text(&self, id: Id) -> &str {
        &self.texts[id as usize]
    }

    pub fn is_boundary(&self, id: Id) -> bool {
        self.boundary[id as usize]
    }

    pub fn token(&self, id: Id) -> Token {
        Token::from_parts(self.texts[id as usize].clone(), self.boundary[id as usize])
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    /// Orders two pairs by the texts of their tokens.
    pub fn cmp_pairs(&self, a: (Id, Id), b: (Id, Id)) -> std::cmp::Ordering {
        self.text(a.0)
            .cmp(self.text(b.0))
            .then_with(|| self.text(a.1).cmp(self.text(b.1)))
    }
}

#[derive(Clone, Copy, Debug)]
enum Piece {
    Chunk(u32),
    Boundary(Id),
}

/// A corpus as deduplicated chunks plus the layout to rebuild sentences.
#[derive(Clone, Debug)]
pub(crate) struct ChunkedCorpus {
    pub chunks: Vec<Vec<Id>>,
    pub weights: Vec<u64>,
    layout: Vec<Vec<Piece>>,
    origins: Vec<usize>,
}

impl ChunkedCorpus {
    pub fn build(corpus: &[SymbolSequence], interner: &mut Interner) -> Self {
        let mut index: FxHashMap<Vec<Id>, u32> = FxHashMap::default();
        let mut chunks = Vec::new();
        let mut weights = Vec::new();
        let mut layout = Vec::with_capacity(corpus.len());
        let mut current = Vec::new();

        let mut flush = |current: &mut Vec<Id>, pieces: &mut Vec<Piece>| {
            if current.is_empty() {
                return;
            }
            let chunk = std::mem::take(current);
            let idx = *index.entry(chunk.clone()).or_insert_with(|| {
                chunks.push(chunk);
                weights.push(0);
                (chunks.len() - 1) as u32
            });
            weights[idx as usize] += 1;
            pieces.push(Piece::Chunk(idx));
        };

        for seq in corpus {
            let mut pieces = Vec::new();
            for token in &seq.tokens {
                let id = interner.intern_token(token);
                if token.is_boundary() {
                    flush(&mut current, &mut pieces);
                    pieces.push(Piece::Boundary(id));
                } else {
                    current.push(id);
                }
            }
            flush(&mut current, &mut pieces);
            layout.push(pieces);
        }

        ChunkedCorpus {
            chunks,
            weights,
            layout,
            origins: corpus.iter().map(|s| s.origin).collect(),
        }
    }

    /// Rebuilds sentences from `chunks`, a rewritten copy of `self.chunks`.
    pub fn resolve(&self, chunks: &[Vec<Id>], interner: &Interner) -> Vec<SymbolSequence> {
        self.layout
            .iter()
            .zip(&self.origins)
            .map(|(pieces, &origin)| {
                let mut tokens = Vec::new();
                for piece in pieces {
                    match *piece {
                        Piece::Chunk(idx) => {
                            tokens.extend(chunks[idx as usize].iter().map(|&id| interner.token(id)))
                        }
                        Piece::Boundary(id) => tokens.push(interner.token(id)),
                    }
                }
                SymbolSequence::new(tokens, origin)
            })
            .collect()
    }

    /// Weighted counts of every adjacent pair inside chunks accepted by `keep`.
    pub fn count_pairs(
        chunks: &[Vec<Id>],
        weights: &[u64],
        mut keep: impl FnMut(Id, Id) -> bool,
    ) -> FxHashMap<u64, u64> {
        let mut counts = FxHashMap::default();
        for (chunk, &w) in chunks.iter().zip(weights) {
            for win in chunk.windows(2) {
                if keep(win[0], win[1]) {
                    *counts.entry(pair_key(win[0], win[1])).or_insert(0) += w;
                }
            }
        }
        counts
    }
}
