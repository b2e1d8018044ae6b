//! Frequency-greedy BPE training, deterministic BPE segmentation and
//! BPE-dropout segmentation.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::intern::{pair_key, unpack, ChunkedCorpus, Id, Interner};
use crate::model::{FreqTable, SymbolSequence, Token, Vocabulary};

/// A learned substitution `left right -> left+right`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    /// Training order, 0 = first learned.
    pub priority: usize,
}

impl MergeRule {
    pub fn merged(&self) -> String {
        format!("{}{}", self.left, self.right)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MergeTable {
    pub rules: Vec<MergeRule>,
    pub base_vocab: Vocabulary,
}

impl MergeTable {
    /// Builds a table from `(left, right)` pairs in priority order.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, S)>,
        base_vocab: Vocabulary,
    ) -> Self {
        let rules = pairs
            .into_iter()
            .enumerate()
            .map(|(priority, (l, r))| MergeRule {
                left: l.into(),
                right: r.into(),
                priority,
            })
            .collect();
        MergeTable { rules, base_vocab }
    }

    /// Base symbols followed by every merged entry.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut vocab = self.base_vocab.clone();
        for rule in &self.rules {
            vocab.insert(&rule.merged());
        }
        vocab
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BpeTrainOptions {
    /// Target vocabulary size `v`, base symbols included.
    pub vocab_size: usize,
    /// Keep merging pairs that occur only once.
    pub merge_singletons: bool,
}

impl BpeTrainOptions {
    pub fn new(vocab_size: usize) -> Self {
        BpeTrainOptions {
            vocab_size,
            merge_singletons: false,
        }
    }
}

fn mergeable(a: &Token, b: &Token) -> bool {
    !a.is_boundary() && !b.is_boundary()
}

/// Counts adjacent token pairs over the corpus, skipping boundary tokens.
pub fn count_bigrams(corpus: &[SymbolSequence]) -> FreqTable {
    let mut table = FreqTable::new();
    for seq in corpus {
        for w in seq.tokens.windows(2) {
            if mergeable(&w[0], &w[1]) {
                table.add(w[0].text(), w[1].text(), 1);
            }
        }
    }
    table
}

/// The highest-count pair; ties go to the lexicographically smallest
/// `(left, right)`.
pub fn most_frequent_bigram(table: &FreqTable) -> Option<(Token, Token)> {
    let (l, r, _) = table.iter().min_by(|a, b| {
        b.2.cmp(&a.2)
            .then_with(|| a.0.cmp(b.0))
            .then_with(|| a.1.cmp(b.1))
    })?;
    Some((Token::new(l).ok()?, Token::new(r).ok()?))
}

/// Replaces every occurrence of `pair`, scanning left to right without
/// overlap.
pub fn merge_all(corpus: &[SymbolSequence], pair: (&Token, &Token)) -> Vec<SymbolSequence> {
    let (left, right) = pair;
    let merged = format!("{}{}", left.text(), right.text());
    corpus
        .iter()
        .map(|seq| {
            let mut out = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                let t = &seq.tokens[i];
                if i + 1 < seq.len()
                    && t == left
                    && &seq.tokens[i + 1] == right
                    && mergeable(t, &seq.tokens[i + 1])
                {
                    out.push(Token::from_parts(merged.clone(), false));
                    i += 2;
                } else {
                    out.push(t.clone());
                    i += 1;
                }
            }
            SymbolSequence::new(out, seq.origin)
        })
        .collect()
}

fn merge_chunk(chunk: &mut Vec<Id>, key: u64, merged: Id) {
    let mut write = 0;
    let mut read = 0;
    while read < chunk.len() {
        if read + 1 < chunk.len() && pair_key(chunk[read], chunk[read + 1]) == key {
            chunk[write] = merged;
            read += 2;
        } else {
            chunk[write] = chunk[read];
            read += 1;
        }
        write += 1;
    }
    chunk.truncate(write);
}

/// Learns merge rules until the vocabulary reaches `vocab_size` or no pair
/// repeats.
pub fn train_bpe(corpus: &[SymbolSequence], opts: BpeTrainOptions) -> Result<MergeTable> {
    let base_vocab = Vocabulary::base_alphabet(corpus);
    if opts.vocab_size < base_vocab.len() {
        return Err(Error::param(format!(
            "vocab size {} is below the base alphabet size {}",
            opts.vocab_size,
            base_vocab.len()
        )));
    }
    let mut interner = Interner::default();
    let ChunkedCorpus {
        mut chunks,
        weights,
        ..
    } = ChunkedCorpus::build(corpus, &mut interner);

    let mut vocab = base_vocab.clone();
    let mut rules = Vec::new();
    let min_count = if opts.merge_singletons { 1 } else { 2 };

    while vocab.len() < opts.vocab_size {
        let counts = ChunkedCorpus::count_pairs(&chunks, &weights, |a, b| {
            !interner.is_boundary(a) && !interner.is_boundary(b)
        });
        let best = counts
            .iter()
            .fold(None::<(u64, u64)>, |best, (&key, &count)| match best {
                Some((bk, bc))
                    if bc > count
                        || (bc == count && interner.cmp_pairs(unpack(bk), unpack(key)).is_le()) =>
                {
                    Some((bk, bc))
                }
                _ => Some((key, count)),
            });
        let Some((key, count)) = best else { break };
        if count < min_count {
            break;
        }
        let (left, right) = unpack(key);
        let merged = interner.concat(left, right);
        for chunk in &mut chunks {
            merge_chunk(chunk, key, merged);
        }
        rules.push(MergeRule {
            left: interner.text(left).to_owned(),
            right: interner.text(right).to_owned(),
            priority: rules.len(),
        });
        vocab.insert(interner.text(merged));
    }

    Ok(MergeTable { rules, base_vocab })
}

/// Applies a [`MergeTable`] to sentences, optionally with dropout.
#[derive(Clone, Debug)]
pub struct BpeSegmenter {
    interner: Interner,
    /// pair -> ascending priorities of the rules for that pair, and the
    /// merged id.
    rules: FxHashMap<u64, (Vec<u32>, Id)>,
}

impl BpeSegmenter {
    pub fn new(table: &MergeTable) -> Self {
        let mut interner = Interner::default();
        let mut rules: FxHashMap<u64, (Vec<u32>, Id)> = FxHashMap::default();
        for (priority, rule) in table.rules.iter().enumerate() {
            let l = interner.intern(&rule.left, false);
            let r = interner.intern(&rule.right, false);
            let m = interner.concat(l, r);
            rules
                .entry(pair_key(l, r))
                .or_insert_with(|| (Vec::new(), m))
                .0
                .push(priority as u32);
        }
        BpeSegmenter { interner, rules }
    }

    /// Applies rules in priority order; each merge occurrence is skipped
    /// independently with probability `dropout`.
    pub fn segment<R: Rng + ?Sized>(
        &self,
        sentence: &SymbolSequence,
        dropout: f64,
        rng: &mut R,
    ) -> SymbolSequence {
        if dropout >= 1.0 {
            return sentence.clone();
        }
        // Tokens unknown to the table, or boundaries, get ids past the
        // interner so that no rule ever matches them.
        let known = self.interner.len() as Id;
        let mut local: Vec<&Token> = Vec::new();
        let mut ids: Vec<Id> = sentence
            .tokens
            .iter()
            .map(|t| match self.interner.get(t.text()) {
                Some(id) if !t.is_boundary() => id,
                _ => {
                    local.push(t);
                    known + (local.len() - 1) as Id
                }
            })
            .collect();

        let mut cursor = 0u32;
        loop {
            let mut best: Option<(u32, u64)> = None;
            for w in ids.windows(2) {
                let key = pair_key(w[0], w[1]);
                if let Some((prios, _)) = self.rules.get(&key) {
                    let i = prios.partition_point(|&p| p < cursor);
                    if let Some(&p) = prios.get(i) {
                        if best.is_none_or(|(bp, _)| p < bp) {
                            best = Some((p, key));
                        }
                    }
                }
            }
            let Some((priority, key)) = best else { break };
            let merged = self.rules[&key].1;

            let mut out = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len()
                    && pair_key(ids[i], ids[i + 1]) == key
                    && !(dropout > 0.0 && rng.random::<f64>() < dropout)
                {
                    out.push(merged);
                    i += 2;
                } else {
                    out.push(ids[i]);
                    i += 1;
                }
            }
            ids = out;
            cursor = priority + 1;
        }

        let tokens = ids
            .into_iter()
            .map(|id| {
                if id < known {
                    self.interner.token(id)
                } else {
                    local[(id - known) as usize].clone()
                }
            })
            .collect();
        SymbolSequence::new(tokens, sentence.origin)
    }
}

/// Segments one depth-0 sentence with `table`; see [`BpeSegmenter::segment`].
pub fn apply_bpe<R: Rng + ?Sized>(
    sentence: &SymbolSequence,
    table: &MergeTable,
    dropout: f64,
    rng: &mut R,
) -> SymbolSequence {
    BpeSegmenter::new(table).segment(sentence, dropout, rng)
}
