//! Shared data model: tokens, symbol sequences, vocabularies and bigram
//! frequency tables, plus the base tokenizer that turns raw sentences into
//! depth-0 symbol sequences.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The blank symbol separating words inside a sentence.
pub const BLANK: char = ' ';

/// How blank symbols take part in merging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// The blank is an ordinary symbol and may be merged with its neighbours.
    MergeAcrossBlanks,
    /// Blanks are tagged as boundaries; no merge ever spans one.
    #[default]
    RespectWordBoundaries,
}

impl BoundaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMode::MergeAcrossBlanks => "merge-across-blanks",
            BoundaryMode::RespectWordBoundaries => "respect-word-boundaries",
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merge-across-blanks" => Ok(BoundaryMode::MergeAcrossBlanks),
            "respect-word-boundaries" => Ok(BoundaryMode::RespectWordBoundaries),
            other => Err(Error::param(format!("unknown boundary mode {other:?}"))),
        }
    }
}

/// A subword: a non-empty piece of a sentence.
///
/// Boundary tokens are blanks produced in
/// [`BoundaryMode::RespectWordBoundaries`]; engines never merge them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    text: String,
    boundary: bool,
}

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::param("token text must be non-empty"));
        }
        Ok(Token {
            text,
            boundary: false,
        })
    }

    pub fn boundary(symbol: char) -> Self {
        Token {
            text: symbol.to_string(),
            boundary: true,
        }
    }

    pub(crate) fn from_parts(text: String, boundary: bool) -> Self {
        debug_assert!(!text.is_empty());
        Token { text, boundary }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_boundary(&self) -> bool {
        self.boundary
    }

    /// Number of base symbols (Unicode scalar values) in this token.
    pub fn symbol_len(&self) -> usize {
        self.text.chars().count()
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// One sentence as an ordered list of tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SymbolSequence {
    pub tokens: Vec<Token>,
    /// Index of the source sentence (line number, 0-based).
    pub origin: usize,
}

impl SymbolSequence {
    pub fn new(tokens: Vec<Token>, origin: usize) -> Self {
        SymbolSequence { tokens, origin }
    }

    /// Builds a sequence of ordinary tokens from their texts.
    pub fn from_texts<S: AsRef<str>>(texts: &[S], origin: usize) -> Result<Self> {
        let tokens = texts
            .iter()
            .map(|t| Token::new(t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolSequence { tokens, origin })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.tokens.iter().map(Token::text).collect()
    }

    /// Concatenation of all token texts.
    pub fn surface(&self) -> String {
        self.tokens.iter().map(Token::text).collect()
    }

    pub fn symbol_count(&self) -> usize {
        self.tokens.iter().map(Token::symbol_len).sum()
    }
}

/// Splits a sentence into one token per Unicode scalar value.
pub fn tokenize_sentence(raw_text: &str, mode: BoundaryMode) -> SymbolSequence {
    tokenize_line(raw_text, mode, 0)
}

pub(crate) fn tokenize_line(raw_text: &str, mode: BoundaryMode, origin: usize) -> SymbolSequence {
    let tokens = raw_text
        .chars()
        .map(|c| {
            if c == BLANK && mode == BoundaryMode::RespectWordBoundaries {
                Token::boundary(c)
            } else {
                Token::from_parts(c.to_string(), false)
            }
        })
        .collect();
    SymbolSequence { tokens, origin }
}

/// Decodes raw bytes before tokenizing.
pub fn tokenize_bytes(raw: &[u8], mode: BoundaryMode) -> Result<SymbolSequence> {
    let text = std::str::from_utf8(raw).map_err(|_| Error::Decode { line: 1 })?;
    Ok(tokenize_sentence(text, mode))
}

/// True iff the tokens of `seq` concatenate to exactly `raw_text`.
pub fn validate_segmentation(seq: &SymbolSequence, raw_text: &str) -> bool {
    let mut rest = raw_text;
    for token in &seq.tokens {
        match rest.strip_prefix(token.text()) {
            Some(r) => rest = r,
            None => return false,
        }
    }
    rest.is_empty()
}

/// An insertion-ordered set of subword strings.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `text` if absent and returns its rank and whether it was new.
    pub fn insert(&mut self, text: &str) -> (usize, bool) {
        if let Some(&rank) = self.index.get(text) {
            return (rank, false);
        }
        let rank = self.entries.len();
        self.entries.push(text.to_owned());
        self.index.insert(text.to_owned(), rank);
        (rank, true)
    }

    pub fn contains(&self, text: &str) -> bool {
        self.index.contains_key(text)
    }

    pub fn rank(&self, text: &str) -> Option<usize> {
        self.index.get(text).copied()
    }

    pub fn get(&self, rank: usize) -> Option<&str> {
        self.entries.get(rank).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in rank order.
    pub fn iter(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(String::as_str)
    }

    /// Length in symbols of the longest entry.
    pub fn max_symbol_len(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.chars().count())
            .max()
            .unwrap_or(0)
    }

    /// The sorted set of base symbols occurring in `corpus`.
    pub fn base_alphabet(corpus: &[SymbolSequence]) -> Self {
        let mut symbols: Vec<char> = corpus
            .iter()
            .flat_map(|s| s.tokens.iter())
            .flat_map(|t| t.text().chars())
            .collect();
        symbols.sort_unstable();
        symbols.dedup();
        let mut vocab = Vocabulary::new();
        let mut buf = [0u8; 4];
        for c in symbols {
            vocab.insert(c.encode_utf8(&mut buf));
        }
        vocab
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for Vocabulary {}

impl<S: AsRef<str>> FromIterator<S> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut vocab = Vocabulary::new();
        for s in iter {
            vocab.insert(s.as_ref());
        }
        vocab
    }
}

/// Occurrence counts of adjacent ordered token pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreqTable {
    counts: HashMap<(String, String), u64>,
}

impl FreqTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, left: &str, right: &str, n: u64) {
        *self
            .counts
            .entry((left.to_owned(), right.to_owned()))
            .or_insert(0) += n;
    }

    pub fn get(&self, left: &str, right: &str) -> u64 {
        self.counts
            .get(&(left.to_owned(), right.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.counts
            .iter()
            .map(|((l, r), &c)| (l.as_str(), r.as_str(), c))
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &FreqTable) {
        for (l, r, c) in other.iter() {
            self.add(l, r, c);
        }
    }
}
