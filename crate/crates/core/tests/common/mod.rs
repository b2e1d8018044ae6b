//! Strategies, property checks and brute-force oracles shared by the
//! property and acceptance suites.

#![allow(dead_code)]

use std::collections::BTreeMap;

use lcpseg::io::{parse_model, write_model, LcpModel};
use lcpseg::{
    apply_bpe, lcp_dropout, lcp_step, merge_all, segment_test_time, select_candidates,
    tokenize_sentence, train_bpe, validate_segmentation, BoundaryMode, BpeTrainOptions, Labeling,
    LcpParams, MergeTable, Model, RngLabels, SymbolSequence, TestMode, Token, Vocabulary,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tokenize_all(lines: &[String], mode: BoundaryMode) -> Vec<SymbolSequence> {
    lines.iter().map(|l| tokenize_sentence(l, mode)).collect()
}

pub fn boundary_mode() -> impl Strategy<Value = BoundaryMode> {
    prop_oneof![
        Just(BoundaryMode::RespectWordBoundaries),
        Just(BoundaryMode::MergeAcrossBlanks)
    ]
}

/// Small corpora over a 4-letter alphabet plus blanks; empty lines allowed.
pub fn corpus() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[abcd ]{0,14}", 1..6)
}

/// Sentences of arbitrary tokens (multi-symbol and boundary tokens).
pub fn token_sequence() -> impl Strategy<Value = Vec<Token>> {
    prop::collection::vec(
        prop_oneof![
            4 => "[abc]{1,2}".prop_map(|s| Token::new(s).unwrap()),
            1 => Just(Token::boundary(' ')),
        ],
        0..16,
    )
}

#[derive(Clone, Debug)]
pub struct LcpCase {
    pub lines: Vec<String>,
    pub mode: BoundaryMode,
    pub vocab_size: usize,
    pub partial: usize,
    pub topk: f64,
    pub seed: u64,
}

pub fn lcp_case() -> impl Strategy<Value = LcpCase> {
    (
        corpus(),
        boundary_mode(),
        0usize..12,
        0usize..8,
        prop_oneof![Just(0.01), Just(0.5), Just(1.0)],
        any::<u64>(),
    )
        .prop_map(|(lines, mode, extra_v, partial_frac, topk, seed)| {
            let base = Vocabulary::base_alphabet(&tokenize_all(&lines, mode))
                .len()
                .max(1);
            let vocab_size = base + extra_v;
            let partial = (1 + partial_frac * vocab_size / 8).min(vocab_size);
            LcpCase {
                lines,
                mode,
                vocab_size,
                partial,
                topk,
                seed,
            }
        })
}

impl LcpCase {
    pub fn params(&self) -> LcpParams {
        let mut p = LcpParams::new(self.vocab_size, self.partial, self.topk);
        p.max_passes = 12;
        p.max_relabel = 8;
        p.stall_limit = 3;
        p
    }

    pub fn run(&self) -> lcpseg::MultiSegmentation {
        let corpus = tokenize_all(&self.lines, self.mode);
        let mut labels = RngLabels::new(rng(self.seed));
        lcp_dropout(&corpus, &self.params(), &mut labels).expect("valid case")
    }
}

fn check_passes(
    passes: impl IntoIterator<Item = Vec<SymbolSequence>>,
    lines: &[String],
) -> Result<(), TestCaseError> {
    for pass in passes {
        prop_assert_eq!(pass.len(), lines.len());
        for (seq, line) in pass.iter().zip(lines) {
            prop_assert!(
                validate_segmentation(seq, line),
                "{:?} vs {:?}",
                seq.texts(),
                line
            );
        }
    }
    Ok(())
}

fn no_token_spans_boundary(
    seqs: &[SymbolSequence],
    mode: BoundaryMode,
) -> Result<(), TestCaseError> {
    if mode == BoundaryMode::RespectWordBoundaries {
        for t in seqs.iter().flat_map(|s| &s.tokens) {
            prop_assert!(
                t.is_boundary() || !t.text().contains(' '),
                "token {:?}",
                t.text()
            );
        }
    }
    Ok(())
}

/// Every engine's output concatenates back to its input.
pub fn check_concatenation((case, dropout): (LcpCase, f64)) -> Result<(), TestCaseError> {
    let corpus = tokenize_all(&case.lines, case.mode);
    let result = case.run();
    for pass in &result.passes {
        no_token_spans_boundary(&pass.segmentation, case.mode)?;
    }
    check_passes(
        result.passes.iter().map(|p| p.segmentation.clone()),
        &case.lines,
    )?;

    let table = train_bpe(&corpus, BpeTrainOptions::new(case.vocab_size)).unwrap();
    let mut r = rng(case.seed);
    let bpe: Vec<_> = corpus
        .iter()
        .map(|s| apply_bpe(s, &table, dropout, &mut r))
        .collect();
    no_token_spans_boundary(&bpe, case.mode)?;
    for (seg, src) in bpe.iter().zip(&corpus) {
        prop_assert!(seg.len() <= src.len());
    }

    let tt: Vec<Vec<SymbolSequence>> = [TestMode::GreedyLongestMatch, TestMode::LcpSample]
        .into_iter()
        .map(|mode| {
            corpus
                .iter()
                .map(|s| segment_test_time(s, &result.global_vocab, mode, case.topk, &mut r))
                .collect()
        })
        .collect();
    check_passes([bpe].into_iter().chain(tt), &case.lines)
}

/// Indices `i` with `L(s[i]) = 1` and `L(s[i+1]) = 0`.
pub fn landmarks(bits: &[bool]) -> Vec<usize> {
    (0..bits.len().saturating_sub(1))
        .filter(|&i| bits[i] && !bits[i + 1])
        .collect()
}

fn vocab_of(seq: &[Token]) -> Vocabulary {
    seq.iter().map(|t| t.text()).collect()
}

/// Landmarks never overlap, one step merges exactly the landmark sites, and
/// no identical pair is ever a candidate.
pub fn check_landmarks((tokens, seed): (Vec<Token>, u64)) -> Result<(), TestCaseError> {
    let vocab = vocab_of(&tokens);
    if vocab.is_empty() {
        return Ok(());
    }
    let labeling = lcpseg::assign_labels(&vocab, &mut rng(seed)).unwrap();
    let bits: Vec<bool> = tokens
        .iter()
        .map(|t| labeling.get(&vocab, t.text()).unwrap())
        .collect();
    let sites = landmarks(&bits);
    for w in sites.windows(2) {
        prop_assert!(w[1] > w[0] + 1, "overlapping landmarks at {:?}", w);
    }

    let corpus = vec![SymbolSequence::new(tokens.clone(), 0)];
    let candidates = select_candidates(&corpus, &vocab, &labeling, 1.0).unwrap();
    for c in &candidates {
        prop_assert_ne!(&c.left, &c.right);
    }
    let mergeable = sites
        .iter()
        .filter(|&&i| !tokens[i].is_boundary() && !tokens[i + 1].is_boundary())
        .count();
    let mut v = vocab.clone();
    let (out, _) = lcp_step(&corpus, &mut v, &labeling, 1.0).unwrap();
    prop_assert_eq!(out[0].len(), tokens.len() - mergeable);
    let surface: String = tokens.iter().map(|t| t.text()).collect();
    prop_assert!(validate_segmentation(&out[0], &surface));
    Ok(())
}

/// `apply_bpe` with p = 0 equals replaying `merge_all` rule by rule, and
/// with p = 1 returns the input.
pub fn check_bpe_replay(
    (lines, mode, extra): (Vec<String>, BoundaryMode, usize),
) -> Result<(), TestCaseError> {
    let corpus = tokenize_all(&lines, mode);
    let base = Vocabulary::base_alphabet(&corpus).len();
    let table = train_bpe(&corpus, BpeTrainOptions::new(base + extra)).unwrap();
    prop_assert!(table.vocabulary().len() <= base + extra);

    let mut replay = corpus.clone();
    for rule in &table.rules {
        let l = Token::new(rule.left.clone()).unwrap();
        let r = Token::new(rule.right.clone()).unwrap();
        replay = merge_all(&replay, (&l, &r));
    }
    let mut r = rng(0);
    for (src, expected) in corpus.iter().zip(&replay) {
        prop_assert_eq!(&apply_bpe(src, &table, 0.0, &mut r), expected);
        prop_assert_eq!(&apply_bpe(src, &table, 1.0, &mut r), src);
    }
    Ok(())
}

/// Same corpus, parameters and seed give identical results.
pub fn check_determinism(case: LcpCase) -> Result<(), TestCaseError> {
    prop_assert_eq!(case.run(), case.run());
    let corpus = tokenize_all(&case.lines, case.mode);
    let table = train_bpe(&corpus, BpeTrainOptions::new(case.vocab_size)).unwrap();
    let segment = |seed| -> Vec<SymbolSequence> {
        let mut r = rng(seed);
        corpus
            .iter()
            .map(|s| apply_bpe(s, &table, 0.3, &mut r))
            .collect()
    };
    prop_assert_eq!(segment(case.seed), segment(case.seed));
    Ok(())
}

fn model_text(m: &Model) -> String {
    let mut buf = Vec::new();
    write_model(&mut buf, m).unwrap();
    String::from_utf8(buf).unwrap()
}

pub fn token_text() -> impl Strategy<Value = String> {
    "[ab\\\\\t\n\r #=]{1,4}"
}

pub fn merge_table() -> impl Strategy<Value = MergeTable> {
    prop::collection::vec((token_text(), token_text()), 0..8)
        .prop_map(|pairs| MergeTable::from_pairs(pairs, Vocabulary::new()))
}

pub fn lcp_model() -> impl Strategy<Value = LcpModel> {
    (
        prop::collection::btree_set(token_text(), 1..10),
        1usize..5000,
        1usize..5000,
        (1u32..=1_000_000).prop_map(|n| f64::from(n) / 1_000_000.0),
        any::<u64>(),
    )
        .prop_map(
            |(entries, vocab_size, partial_vocab, topk, seed)| LcpModel {
                vocab_size,
                partial_vocab,
                topk,
                seed,
                vocab: entries.iter().collect(),
            },
        )
}

/// `load(save(m)) == m` and re-saving is byte-identical.
pub fn check_model_roundtrip((table, lcp): (MergeTable, LcpModel)) -> Result<(), TestCaseError> {
    let bpe = Model::Bpe(table.clone());
    let text = model_text(&bpe);
    let Model::Bpe(back) = parse_model(&text).unwrap() else {
        return Err(TestCaseError::fail("wrong model kind"));
    };
    prop_assert_eq!(&back.rules, &table.rules);
    prop_assert_eq!(model_text(&Model::Bpe(back)), text);

    let lcp = Model::Lcp(lcp);
    let text = model_text(&lcp);
    let back = parse_model(&text).unwrap();
    prop_assert_eq!(&back, &lcp);
    prop_assert_eq!(model_text(&back), text);
    Ok(())
}

/// Brute-force bigram counts.
pub fn count_bigrams_oracle(corpus: &[SymbolSequence]) -> BTreeMap<(String, String), u64> {
    let mut counts = BTreeMap::new();
    for seq in corpus {
        let t = &seq.tokens;
        for i in 0..t.len() {
            for j in 0..t.len() {
                if j == i + 1 && !t[i].is_boundary() && !t[j].is_boundary() {
                    *counts
                        .entry((t[i].text().to_owned(), t[j].text().to_owned()))
                        .or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

/// BLEU straight from its definition, by linear scans.
pub fn bleu_oracle(cands: &[Vec<String>], refs: &[Vec<String>], max_n: usize) -> f64 {
    let occurrences = |words: &[String], gram: &[String]| -> u64 {
        if words.len() < gram.len() {
            return 0;
        }
        (0..=words.len() - gram.len())
            .filter(|&i| words[i..i + gram.len()] == *gram)
            .count() as u64
    };
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (mut matched, mut total) = (0u64, 0u64);
        for (c, r) in cands.iter().zip(refs) {
            if c.len() < n {
                continue;
            }
            total += (c.len() - n + 1) as u64;
            let mut seen: Vec<&[String]> = Vec::new();
            for i in 0..=c.len() - n {
                let gram = &c[i..i + n];
                if seen.contains(&gram) {
                    continue;
                }
                seen.push(gram);
                matched += occurrences(c, gram).min(occurrences(r, gram));
            }
        }
        if matched == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / total as f64).ln() / max_n as f64;
    }
    let c: usize = cands.iter().map(Vec::len).sum();
    let r: usize = refs.iter().map(Vec::len).sum();
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    bp * log_sum.exp()
}

/// A random sentence pair corpus over a 6-word vocabulary.
pub fn random_bleu_input(r: &mut ChaCha8Rng) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let words = ["the", "cat", "sat", "on", "a", "mat"];
    let sentence = |r: &mut ChaCha8Rng| -> Vec<String> {
        let len = r.random_range(0..12);
        (0..len)
            .map(|_| words[r.random_range(0..words.len())].to_owned())
            .collect()
    };
    let n = r.random_range(1..6);
    let cands: Vec<Vec<String>> = (0..n).map(|_| sentence(r)).collect();
    let refs = cands
        .iter()
        .map(|c| {
            if r.random_bool(0.2) {
                return sentence(r);
            }
            // Noisy copy: substitutions, and an occasional extra word.
            let mut s: Vec<String> = c
                .iter()
                .map(|w| {
                    if r.random_bool(0.15) {
                        words[r.random_range(0..words.len())].to_owned()
                    } else {
                        w.clone()
                    }
                })
                .collect();
            if r.random_bool(0.5) {
                s.push(words[r.random_range(0..words.len())].to_owned());
            }
            s
        })
        .collect();
    (cands, refs)
}

/// A random corpus of arbitrary tokens, for the counting oracle.
pub fn random_token_corpus(r: &mut ChaCha8Rng) -> Vec<SymbolSequence> {
    let pieces = ["a", "b", "c", "ab", "ba", "abc"];
    (0..r.random_range(0..6))
        .map(|origin| {
            let tokens = (0..r.random_range(0..15))
                .map(|_| {
                    if r.random_bool(0.15) {
                        Token::boundary(' ')
                    } else {
                        Token::new(pieces[r.random_range(0..pieces.len())]).unwrap()
                    }
                })
                .collect();
            SymbolSequence::new(tokens, origin)
        })
        .collect()
}

/// Deterministic synthetic corpus: `n` sentences over the first `alphabet`
/// letters, lengths in `[min_len, max_len]`.
pub fn synthetic_corpus(
    n: usize,
    alphabet: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Vec<String> {
    let letters: Vec<char> = ('a'..='z').take(alphabet).collect();
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let len = r.random_range(min_len..=max_len);
            (0..len)
                .map(|_| letters[r.random_range(0..letters.len())])
                .collect()
        })
        .collect()
}

/// Deterministic word-level corpus: sentences of Zipf-distributed words
/// drawn from a random lexicon, about `chars` symbols per sentence.
pub fn synthetic_text(n: usize, chars: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    let lexicon: Vec<String> = (0..5000)
        .map(|_| {
            let len = r.random_range(2..=9);
            (0..len)
                .map(|_| char::from(b'a' + r.random_range(0..26u8)))
                .collect()
        })
        .collect();
    let cumulative: Vec<f64> = lexicon
        .iter()
        .enumerate()
        .scan(0.0, |acc, (i, _)| {
            *acc += 1.0 / (i as f64 + 1.0);
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    (0..n)
        .map(|_| {
            let mut line = String::new();
            while line.len() < chars {
                let x = r.random::<f64>() * total;
                let i = cumulative
                    .partition_point(|&c| c < x)
                    .min(lexicon.len() - 1);
                if !line.is_empty() {
                    line.push(' ');
                }
                line.push_str(&lexicon[i]);
            }
            line
        })
        .collect()
}

pub fn labeling_for(vocab: &Vocabulary, bits: &[(&str, bool)]) -> Labeling {
    let mut script = lcpseg::ScriptedLabels::new([bits.iter().copied()]);
    lcpseg::LabelSource::draw(&mut script, vocab).unwrap()
}
