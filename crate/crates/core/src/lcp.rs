//! LCP-dropout: random binary labeling of the vocabulary, merging of the
//! most frequent `10` landmark bigrams, and repeated passes that each
//! rebuild a partial vocabulary from the raw symbols.
//!
//! Every merge site is a position `i` with `L(s[i]) = 1` and
//! `L(s[i+1]) = 0`. Position `i+1` carries a 0 and so cannot start another
//! site, which makes all merges chosen in one step disjoint. Labels are a
//! function of the token text, so identical substrings are parsed the same
//! way wherever they occur.

use std::cmp::Ordering;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intern::{pair_key, unpack, ChunkedCorpus, Id, Interner};
use crate::model::{SymbolSequence, Token, Vocabulary};

/// Hyperparameters of an LCP-dropout run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcpParams {
    /// Total vocabulary budget `v`.
    pub vocab_size: usize,
    /// Per-pass vocabulary budget `l`, `0 < l <= v`.
    pub partial_vocab: usize,
    /// Fraction `k` in `(0, 1]` of landmark bigrams merged per step.
    pub topk: f64,
    #[serde(default = "defaults::max_passes")]
    pub max_passes: usize,
    #[serde(default = "defaults::max_inner")]
    pub max_inner: usize,
    #[serde(default = "defaults::max_relabel")]
    pub max_relabel: usize,
    #[serde(default = "defaults::stall_limit")]
    pub stall_limit: usize,
}

pub mod defaults {
    pub const TOPK: f64 = 0.01;

    pub fn max_passes() -> usize {
        100
    }
    pub fn max_inner() -> usize {
        10_000
    }
    pub fn max_relabel() -> usize {
        32
    }
    pub fn stall_limit() -> usize {
        10
    }
}

impl LcpParams {
    pub fn new(vocab_size: usize, partial_vocab: usize, topk: f64) -> Self {
        LcpParams {
            vocab_size,
            partial_vocab,
            topk,
            max_passes: defaults::max_passes(),
            max_inner: defaults::max_inner(),
            max_relabel: defaults::max_relabel(),
            stall_limit: defaults::stall_limit(),
        }
    }

    /// `k = 0.01`, `l = v / 2`.
    pub fn with_vocab_size(vocab_size: usize) -> Self {
        Self::new(vocab_size, (vocab_size / 2).max(1), defaults::TOPK)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::param("vocab size must be positive"));
        }
        if self.partial_vocab == 0 || self.partial_vocab > self.vocab_size {
            return Err(Error::param(format!(
                "partial vocab must satisfy 0 < l <= v (got l={}, v={})",
                self.partial_vocab, self.vocab_size
            )));
        }
        if !(self.topk > 0.0 && self.topk <= 1.0) {
            return Err(Error::param(format!(
                "topk must lie in (0, 1], got {}",
                self.topk
            )));
        }
        for (name, value) in [
            ("max passes", self.max_passes),
            ("max inner", self.max_inner),
            ("max relabel", self.max_relabel),
            ("stall limit", self.stall_limit),
        ] {
            if value == 0 {
                return Err(Error::param(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One bit per vocabulary entry, aligned with the entries' ranks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    bits: Vec<bool>,
    /// Position of this labeling in its source's draw sequence.
    pub draw: Option<u64>,
}

impl Labeling {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Labeling { bits, draw: None }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Label of `text` under the vocabulary this labeling was drawn for.
    pub fn get(&self, vocab: &Vocabulary, text: &str) -> Option<bool> {
        vocab.rank(text).and_then(|r| self.bits.get(r).copied())
    }
}

/// Draws one fair bit per entry, visiting entries in rank order.
pub fn assign_labels<R: Rng + ?Sized>(vocab: &Vocabulary, rng: &mut R) -> Result<Labeling> {
    if vocab.is_empty() {
        return Err(Error::param("cannot label an empty vocabulary"));
    }
    Ok(Labeling::from_bits(
        (0..vocab.len()).map(|_| rng.random::<bool>()).collect(),
    ))
}

/// Where labelings come from during [`lcp_dropout`].
pub trait LabelSource {
    fn draw(&mut self, vocab: &Vocabulary) -> Result<Labeling>;
}

/// Labels drawn from a random number generator.
#[derive(Clone, Debug)]
pub struct RngLabels<R> {
    rng: R,
    draws: u64,
}

impl<R: Rng> RngLabels<R> {
    pub fn new(rng: R) -> Self {
        RngLabels { rng, draws: 0 }
    }
}

impl<R: Rng> LabelSource for RngLabels<R> {
    fn draw(&mut self, vocab: &Vocabulary) -> Result<Labeling> {
        let mut labeling = assign_labels(vocab, &mut self.rng)?;
        labeling.draw = Some(self.draws);
        self.draws += 1;
        Ok(labeling)
    }
}

/// A fixed, replayable sequence of labelings keyed by entry text.
#[derive(Clone, Debug, Default)]
pub struct ScriptedLabels {
    script: Vec<FxHashMap<String, bool>>,
    next: usize,
}

impl ScriptedLabels {
    pub fn new<I, S>(script: I) -> Self
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = (S, bool)>,
        S: Into<String>,
    {
        let script = script
            .into_iter()
            .map(|step| step.into_iter().map(|(s, b)| (s.into(), b)).collect())
            .collect();
        ScriptedLabels { script, next: 0 }
    }

    /// Parses a JSON array of objects mapping entry text to `0`/`1` (or
    /// `false`/`true`).
    pub fn from_json(json: &str) -> Result<Self> {
        let steps: Vec<FxHashMap<String, serde_json::Value>> = serde_json::from_str(json)?;
        let mut script = Vec::with_capacity(steps.len());
        for (i, step) in steps.into_iter().enumerate() {
            let mut labels = FxHashMap::default();
            for (text, value) in step {
                let bit = match value {
                    serde_json::Value::Bool(b) => b,
                    serde_json::Value::Number(n) if n.as_u64() == Some(0) => false,
                    serde_json::Value::Number(n) if n.as_u64() == Some(1) => true,
                    other => {
                        return Err(Error::Malformed {
                            line: i + 1,
                            msg: format!("label for {text:?} must be 0 or 1, got {other}"),
                        })
                    }
                };
                labels.insert(text, bit);
            }
            script.push(labels);
        }
        Ok(ScriptedLabels { script, next: 0 })
    }

    pub fn remaining(&self) -> usize {
        self.script.len() - self.next
    }
}

impl LabelSource for ScriptedLabels {
    fn draw(&mut self, vocab: &Vocabulary) -> Result<Labeling> {
        let step = self
            .script
            .get(self.next)
            .ok_or(Error::ScriptExhausted(self.next))?;
        let bits = vocab
            .iter()
            .map(|text| {
                step.get(text).copied().ok_or_else(|| {
                    Error::Contract(format!(
                        "scripted labeling {} has no label for {text:?}",
                        self.next
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let labeling = Labeling {
            bits,
            draw: Some(self.next as u64),
        };
        self.next += 1;
        Ok(labeling)
    }
}

/// A landmark bigram and its corpus frequency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub left: Token,
    pub right: Token,
    pub count: u64,
}

const UNLABELED: u8 = 2;

/// Number of candidates kept out of `available`: `ceil(k * available)`.
pub fn topk_count(k: f64, available: usize) -> usize {
    if available == 0 {
        return 0;
    }
    // The epsilon absorbs rounding in products like 0.07 * 100.
    let n = (k * available as f64 - 1e-9).ceil();
    (n.max(1.0) as usize).min(available)
}

/// Label bits indexed by token id.
fn bits_by_id(interner_len: usize, vocab_ids: &[Id], labeling: &Labeling) -> Result<Vec<u8>> {
    if labeling.len() != vocab_ids.len() {
        return Err(Error::Contract(format!(
            "labeling covers {} entries but the vocabulary has {}",
            labeling.len(),
            vocab_ids.len()
        )));
    }
    let mut bits = vec![UNLABELED; interner_len];
    for (&id, &bit) in vocab_ids.iter().zip(labeling.bits()) {
        bits[id as usize] = u8::from(bit);
    }
    Ok(bits)
}

/// Ranked landmark pairs `(key, count)`, truncated to the top `k` fraction,
/// and the number of distinct candidates before truncation.
fn select_ids(
    chunks: &[Vec<Id>],
    weights: &[u64],
    bits: &[u8],
    interner: &Interner,
    k: f64,
) -> Result<(Vec<(u64, u64)>, usize)> {
    let mut counts: FxHashMap<u64, u64> = FxHashMap::default();
    for (chunk, &w) in chunks.iter().zip(weights) {
        for &id in chunk {
            if bits[id as usize] == UNLABELED {
                return Err(Error::Contract(format!(
                    "token {:?} has no label",
                    interner.text(id)
                )));
            }
        }
        for win in chunk.windows(2) {
            let (a, b) = (win[0], win[1]);
            if bits[a as usize] == 1
                && bits[b as usize] == 0
                && !interner.is_boundary(a)
                && !interner.is_boundary(b)
            {
                *counts.entry(pair_key(a, b)).or_insert(0) += w;
            }
        }
    }
    let mut ranked: Vec<(u64, u64)> = counts.into_iter().collect();
    let available = ranked.len();
    let keep = topk_count(k, available);
    let order = |x: &(u64, u64), y: &(u64, u64)| -> Ordering {
        y.1.cmp(&x.1)
            .then_with(|| interner.cmp_pairs(unpack(x.0), unpack(y.0)))
    };
    if keep < available {
        ranked.select_nth_unstable_by(keep - 1, order);
        ranked.truncate(keep);
    }
    ranked.sort_unstable_by(order);
    Ok((ranked, available))
}

/// Merges every occurrence of a selected pair. The selected pairs are all
/// `10` landmarks, so the occurrences never overlap.
fn merge_ids(chunks: &mut [Vec<Id>], selected: &FxHashMap<u64, Id>) {
    for chunk in chunks {
        if chunk.len() < 2 {
            continue;
        }
        let mut write = 0;
        let mut read = 0;
        while read < chunk.len() {
            let merged = (read + 1 < chunk.len())
                .then(|| selected.get(&pair_key(chunk[read], chunk[read + 1])))
                .flatten();
            match merged {
                Some(&m) => {
                    chunk[write] = m;
                    read += 2;
                }
                None => {
                    chunk[write] = chunk[read];
                    read += 1;
                }
            }
            write += 1;
        }
        chunk.truncate(write);
    }
}

struct StepOutcome {
    available: usize,
    /// Merged ids in candidate rank order.
    merged: Vec<Id>,
}

fn step_ids(
    chunks: &mut [Vec<Id>],
    weights: &[u64],
    bits: &[u8],
    interner: &mut Interner,
    k: f64,
) -> Result<StepOutcome> {
    let (ranked, available) = select_ids(chunks, weights, bits, interner, k)?;
    let mut selected = FxHashMap::default();
    let mut merged = Vec::with_capacity(ranked.len());
    for &(key, _) in &ranked {
        let (a, b) = unpack(key);
        let m = interner.concat(a, b);
        selected.insert(key, m);
        merged.push(m);
    }
    merge_ids(chunks, &selected);
    Ok(StepOutcome { available, merged })
}

/// Interns `corpus` and maps every vocabulary entry to its id.
fn prepare(corpus: &[SymbolSequence], vocab: &Vocabulary) -> (Interner, ChunkedCorpus, Vec<Id>) {
    let mut interner = Interner::default();
    let chunked = ChunkedCorpus::build(corpus, &mut interner);
    let ids = vocab.iter().map(|t| interner.intern(t, false)).collect();
    (interner, chunked, ids)
}

/// Distinct landmark bigrams `(a, b)` with `L(a) = 1`, `L(b) = 0`, ranked by
/// frequency (ties lexicographic), keeping the top `ceil(k * C)` of `C`.
pub fn select_candidates(
    corpus: &[SymbolSequence],
    vocab: &Vocabulary,
    labeling: &Labeling,
    k: f64,
) -> Result<Vec<Candidate>> {
    let (interner, chunked, ids) = prepare(corpus, vocab);
    let bits = bits_by_id(interner.len(), &ids, labeling)?;
    let (ranked, _) = select_ids(&chunked.chunks, &chunked.weights, &bits, &interner, k)?;
    Ok(ranked
        .into_iter()
        .map(|(key, count)| {
            let (a, b) = unpack(key);
            Candidate {
                left: interner.token(a),
                right: interner.token(b),
                count,
            }
        })
        .collect())
}

/// One labeling round: merges the selected landmark bigrams everywhere and
/// appends each new concatenation to `vocab`. Returns the rewritten corpus
/// and the entries added.
pub fn lcp_step(
    corpus: &[SymbolSequence],
    vocab: &mut Vocabulary,
    labeling: &Labeling,
    k: f64,
) -> Result<(Vec<SymbolSequence>, Vec<Token>)> {
    let (mut interner, chunked, ids) = prepare(corpus, vocab);
    let bits = bits_by_id(interner.len(), &ids, labeling)?;
    let mut chunks = chunked.chunks.clone();
    let outcome = step_ids(&mut chunks, &chunked.weights, &bits, &mut interner, k)?;
    let mut added = Vec::new();
    for m in outcome.merged {
        if vocab.insert(interner.text(m)).1 {
            added.push(interner.token(m));
        }
    }
    Ok((chunked.resolve(&chunks, &interner), added))
}

/// Why a pass stopped labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassEnd {
    /// `|V_m|` reached the partial budget.
    Budget,
    /// `max_relabel` consecutive labelings found no landmark bigram.
    RelabelExhausted,
    /// `max_inner` labelings were executed.
    InnerLimit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassTrace {
    /// Labelings executed in this pass, unproductive ones included.
    pub depth: usize,
    /// Vocabulary entries added by each productive labeling.
    pub added_per_depth: Vec<usize>,
    /// Labelings that yielded no candidate.
    pub relabel_retries: usize,
    pub end: PassEnd,
}

/// Why the whole run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// `|V| >= v`.
    Budget,
    MaxPasses,
    /// `stall_limit` consecutive passes added nothing to `V`.
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassRecord {
    /// One sequence per input sentence, line-aligned.
    pub segmentation: Vec<SymbolSequence>,
    /// The pass vocabulary `V_i`.
    pub vocab: Vocabulary,
    pub trace: PassTrace,
}

/// Several segmentations of the same corpus and their union vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSegmentation {
    pub passes: Vec<PassRecord>,
    pub global_vocab: Vocabulary,
    pub termination: Termination,
}

/// Runs LCP-dropout over a depth-0 corpus.
///
/// Every pass restarts from the raw symbols with `V_m` holding only the base
/// alphabet and keeps labeling while `|V_m| < l`; afterwards `V_m` joins the
/// global vocabulary. The run ends once `|V| >= v` or a safety limit trips.
pub fn lcp_dropout(
    corpus: &[SymbolSequence],
    params: &LcpParams,
    labels: &mut dyn LabelSource,
) -> Result<MultiSegmentation> {
    params.validate()?;
    if let Some(t) = corpus
        .iter()
        .flat_map(|s| &s.tokens)
        .find(|t| t.symbol_len() != 1)
    {
        return Err(Error::Contract(format!(
            "lcp_dropout expects a depth-0 corpus, found token {:?}",
            t.text()
        )));
    }
    let base = Vocabulary::base_alphabet(corpus);
    if params.vocab_size < base.len() {
        return Err(Error::param(format!(
            "vocab size {} is below the base alphabet size {}",
            params.vocab_size,
            base.len()
        )));
    }

    let (mut interner, chunked, base_ids) = prepare(corpus, &base);
    let mut global = Vocabulary::new();
    let mut passes = Vec::new();
    let mut stalled = 0;

    loop {
        let mut chunks = chunked.chunks.clone();
        let mut vocab = base.clone();
        let mut vocab_ids = base_ids.clone();
        let mut trace = PassTrace {
            depth: 0,
            added_per_depth: Vec::new(),
            relabel_retries: 0,
            end: PassEnd::Budget,
        };
        let mut idle = 0;

        while vocab.len() < params.partial_vocab {
            if vocab.is_empty() {
                // Nothing to label: the corpus has no symbols at all.
                trace.end = PassEnd::RelabelExhausted;
                break;
            }
            if trace.depth >= params.max_inner {
                trace.end = PassEnd::InnerLimit;
                break;
            }
            let labeling = labels.draw(&vocab)?;
            let bits = bits_by_id(interner.len(), &vocab_ids, &labeling)?;
            trace.depth += 1;
            let outcome = step_ids(
                &mut chunks,
                &chunked.weights,
                &bits,
                &mut interner,
                params.topk,
            )?;
            if outcome.available == 0 {
                trace.relabel_retries += 1;
                idle += 1;
                if idle >= params.max_relabel {
                    trace.end = PassEnd::RelabelExhausted;
                    break;
                }
                continue;
            }
            idle = 0;
            let mut added = 0;
            for m in outcome.merged {
                if vocab.insert(interner.text(m)).1 {
                    vocab_ids.push(m);
                    added += 1;
                }
            }
            trace.added_per_depth.push(added);
        }

        let before = global.len();
        for entry in vocab.iter() {
            global.insert(entry);
        }
        let grew = global.len() > before;
        passes.push(PassRecord {
            segmentation: chunked.resolve(&chunks, &interner),
            vocab,
            trace,
        });

        let termination = if global.len() >= params.vocab_size {
            Some(Termination::Budget)
        } else if passes.len() >= params.max_passes {
            Some(Termination::MaxPasses)
        } else {
            stalled = if grew { 0 } else { stalled + 1 };
            (stalled >= params.stall_limit).then_some(Termination::Stalled)
        };
        if let Some(termination) = termination {
            return Ok(MultiSegmentation {
                passes,
                global_vocab: global,
                termination,
            });
        }
    }
}

/// Test-time segmentation strategy for a trained LCP vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    /// Left-to-right longest prefix match against the vocabulary.
    #[default]
    GreedyLongestMatch,
    /// Random labelings restricted to merges already in the vocabulary.
    LcpSample,
}

impl std::str::FromStr for TestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy-longest-match" => Ok(TestMode::GreedyLongestMatch),
            "lcp-sample" => Ok(TestMode::LcpSample),
            other => Err(Error::param(format!("unknown test mode {other:?}"))),
        }
    }
}

/// Segments unseen sentences with a trained vocabulary.
#[derive(Clone, Debug)]
pub struct LcpSegmenter {
    vocab: Vocabulary,
    max_len: usize,
    pub mode: TestMode,
    pub topk: f64,
    pub max_relabel: usize,
}

impl LcpSegmenter {
    pub fn new(vocab: Vocabulary, mode: TestMode, topk: f64) -> Self {
        LcpSegmenter {
            max_len: vocab.max_symbol_len(),
            vocab,
            mode,
            topk,
            max_relabel: defaults::max_relabel(),
        }
    }

    pub fn segment<R: Rng + ?Sized>(
        &self,
        sentence: &SymbolSequence,
        rng: &mut R,
    ) -> SymbolSequence {
        let tokens = match self.mode {
            TestMode::GreedyLongestMatch => self.longest_match(&sentence.tokens),
            TestMode::LcpSample => self.sample(sentence.tokens.clone(), rng),
        };
        SymbolSequence::new(tokens, sentence.origin)
    }

    fn longest_match(&self, tokens: &[Token]) -> Vec<Token> {
        let mut out = Vec::with_capacity(tokens.len());
        for run in tokens.chunk_by(|a, b| !a.is_boundary() && !b.is_boundary()) {
            if run[0].is_boundary() {
                out.extend_from_slice(run);
                continue;
            }
            let text: String = run.iter().map(Token::text).collect();
            let mut offsets: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
            offsets.push(text.len());
            let n = offsets.len() - 1;
            let mut pos = 0;
            while pos < n {
                let longest = (2..=self.max_len.min(n - pos))
                    .rev()
                    .find(|&len| self.vocab.contains(&text[offsets[pos]..offsets[pos + len]]))
                    .unwrap_or(1);
                out.push(Token::from_parts(
                    text[offsets[pos]..offsets[pos + longest]].to_owned(),
                    false,
                ));
                pos += longest;
            }
        }
        out
    }

    fn sample<R: Rng + ?Sized>(&self, mut tokens: Vec<Token>, rng: &mut R) -> Vec<Token> {
        let mut idle = 0;
        while idle < self.max_relabel && tokens.len() > 1 {
            // Distinct tokens in order of first appearance.
            let mut local = Vocabulary::new();
            for t in &tokens {
                local.insert(t.text());
            }
            let bits: Vec<bool> = (0..local.len()).map(|_| rng.random::<bool>()).collect();
            let bit = |t: &Token| bits[local.rank(t.text()).expect("token in local vocab")];

            let mut counts: FxHashMap<(&str, &str), u64> = FxHashMap::default();
            for w in tokens.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                if !a.is_boundary()
                    && !b.is_boundary()
                    && bit(a)
                    && !bit(b)
                    && self.vocab.contains(&format!("{}{}", a.text(), b.text()))
                {
                    *counts.entry((a.text(), b.text())).or_insert(0) += 1;
                }
            }
            if counts.is_empty() {
                idle += 1;
                continue;
            }
            idle = 0;
            let mut ranked: Vec<_> = counts.into_iter().collect();
            ranked.sort_unstable_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
            ranked.truncate(topk_count(self.topk, ranked.len()));
            let selected: Vec<(String, String)> = ranked
                .into_iter()
                .map(|((a, b), _)| (a.to_owned(), b.to_owned()))
                .collect();

            let mut out = Vec::with_capacity(tokens.len());
            let mut i = 0;
            while i < tokens.len() {
                if i + 1 < tokens.len()
                    && !tokens[i].is_boundary()
                    && !tokens[i + 1].is_boundary()
                    && selected
                        .iter()
                        .any(|(a, b)| a == tokens[i].text() && b == tokens[i + 1].text())
                    && bit(&tokens[i])
                    && !bit(&tokens[i + 1])
                {
                    out.push(Token::from_parts(
                        format!("{}{}", tokens[i].text(), tokens[i + 1].text()),
                        false,
                    ));
                    i += 2;
                } else {
                    out.push(tokens[i].clone());
                    i += 1;
                }
            }
            tokens = out;
        }
        tokens
    }
}

/// Segments one sentence with vocabulary `vocab`; see [`LcpSegmenter`].
pub fn segment_test_time<R: Rng + ?Sized>(
    sentence: &SymbolSequence,
    vocab: &Vocabulary,
    mode: TestMode,
    k: f64,
    rng: &mut R,
) -> SymbolSequence {
    LcpSegmenter::new(vocab.clone(), mode, k).segment(sentence, rng)
}
