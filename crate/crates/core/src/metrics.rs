//! Segmentation statistics and corpus-level BLEU.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcp::MultiSegmentation;
use crate::model::{validate_segmentation, SymbolSequence, BLANK};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationStats {
    /// Number of passes `m`.
    pub multiplicity_passes: f64,
    /// Mean number of distinct segmentations per input sentence.
    pub multiplicity_distinct: f64,
    /// Mean labelings per pass.
    pub mean_depth: f64,
    /// Symbols per token over all passes.
    pub avg_subword_len: f64,
    /// Tokens after segmentation over symbols before, over all passes.
    pub compression_ratio: f64,
    /// Non-blank symbols per blank-delimited word of the raw corpus.
    pub avg_word_len: f64,
    pub sentences: usize,
    pub symbols: u64,
    pub tokens: u64,
}

/// Statistics of a run against the raw corpus it segmented.
pub fn compute_stats<S: AsRef<str>>(
    result: &MultiSegmentation,
    raw_corpus: &[S],
) -> Result<SegmentationStats> {
    let passes: Vec<&[SymbolSequence]> = result
        .passes
        .iter()
        .map(|p| p.segmentation.as_slice())
        .collect();
    let depths: Vec<usize> = result.passes.iter().map(|p| p.trace.depth).collect();
    stats_from_passes(&passes, &depths, raw_corpus)
}

/// Statistics from bare pass segmentations and their depths.
pub fn stats_from_passes<S: AsRef<str>>(
    passes: &[&[SymbolSequence]],
    depths: &[usize],
    raw_corpus: &[S],
) -> Result<SegmentationStats> {
    if passes.is_empty() {
        return Err(Error::Contract("no passes to summarize".into()));
    }
    if depths.len() != passes.len() {
        return Err(Error::Contract(format!(
            "{} depths for {} passes",
            depths.len(),
            passes.len()
        )));
    }
    for (i, pass) in passes.iter().enumerate() {
        if pass.len() != raw_corpus.len() {
            return Err(Error::Contract(format!(
                "pass {} has {} sentences, corpus has {}",
                i + 1,
                pass.len(),
                raw_corpus.len()
            )));
        }
        for (j, (seq, raw)) in pass.iter().zip(raw_corpus).enumerate() {
            if !validate_segmentation(seq, raw.as_ref()) {
                return Err(Error::Contract(format!(
                    "pass {} sentence {} does not reproduce its source",
                    i + 1,
                    j + 1
                )));
            }
        }
    }

    let symbols: u64 = raw_corpus
        .iter()
        .map(|s| s.as_ref().chars().count() as u64)
        .sum();
    let tokens: u64 = passes
        .iter()
        .flat_map(|p| p.iter())
        .map(|s| s.len() as u64)
        .sum();
    let m = passes.len() as u64;

    let distinct: u64 = (0..raw_corpus.len())
        .map(|j| {
            passes
                .iter()
                .map(|p| p[j].texts())
                .collect::<HashSet<_>>()
                .len() as u64
        })
        .sum();

    let (word_symbols, words) = raw_corpus.iter().fold((0u64, 0u64), |(c, w), s| {
        let s = s.as_ref();
        let words = s.split(BLANK).filter(|w| !w.is_empty());
        let (wc, ww) = words.fold((0u64, 0u64), |(c, n), w| {
            (c + w.chars().count() as u64, n + 1)
        });
        (c + wc, w + ww)
    });

    let ratio = |num: u64, den: u64, empty: f64| {
        if den == 0 {
            empty
        } else {
            num as f64 / den as f64
        }
    };

    Ok(SegmentationStats {
        multiplicity_passes: m as f64,
        multiplicity_distinct: ratio(distinct, raw_corpus.len() as u64, 0.0),
        mean_depth: ratio(depths.iter().map(|&d| d as u64).sum(), m, 0.0),
        avg_subword_len: ratio(symbols * m, tokens, 1.0),
        compression_ratio: ratio(tokens, symbols * m, 1.0),
        avg_word_len: ratio(word_symbols, words, 0.0),
        sentences: raw_corpus.len(),
        symbols,
        tokens,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BleuOptions {
    /// Highest n-gram order `N`.
    pub max_n: usize,
    /// One weight per order, summing to 1.
    pub weights: Vec<f64>,
    /// Cap each n-gram's matches at its reference count.
    pub clipped: bool,
}

impl BleuOptions {
    pub fn uniform(max_n: usize) -> Self {
        BleuOptions {
            max_n,
            weights: vec![1.0 / max_n as f64; max_n],
            clipped: true,
        }
    }
}

impl Default for BleuOptions {
    fn default() -> Self {
        Self::uniform(4)
    }
}

fn ngram_counts<T: Eq + Hash>(words: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if words.len() >= n {
        for gram in words.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU: `BP * exp(sum_n w_n log p_n)` with n-gram matches and
/// lengths aggregated over the whole corpus. Any zero precision gives 0.
pub fn corpus_bleu<C, T>(candidates: &[C], references: &[C], opts: &BleuOptions) -> Result<f64>
where
    C: AsRef<[T]>,
    T: Eq + Hash,
{
    if candidates.is_empty() {
        return Err(Error::param("BLEU needs at least one sentence"));
    }
    if candidates.len() != references.len() {
        return Err(Error::param(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if opts.max_n == 0 || opts.weights.len() != opts.max_n {
        return Err(Error::param("need one weight per n-gram order"));
    }
    let weight_sum: f64 = opts.weights.iter().sum();
    if (weight_sum - 1.0).abs() > 1e-9 || opts.weights.iter().any(|&w| w < 0.0) {
        return Err(Error::param(format!(
            "weights must be non-negative and sum to 1, got {weight_sum}"
        )));
    }

    let mut matches = vec![0u64; opts.max_n];
    let mut totals = vec![0u64; opts.max_n];
    let (mut cand_len, mut ref_len) = (0u64, 0u64);

    for (cand, reference) in candidates.iter().zip(references) {
        let (cand, reference) = (cand.as_ref(), reference.as_ref());
        cand_len += cand.len() as u64;
        ref_len += reference.len() as u64;
        for n in 1..=opts.max_n {
            let cand_grams = ngram_counts(cand, n);
            let ref_grams = ngram_counts(reference, n);
            for (gram, &count) in &cand_grams {
                let in_ref = ref_grams.get(gram).copied().unwrap_or(0);
                matches[n - 1] += if opts.clipped {
                    count.min(in_ref)
                } else if in_ref > 0 {
                    count
                } else {
                    0
                };
                totals[n - 1] += count;
            }
        }
    }

    let mut log_sum = 0.0;
    for n in 0..opts.max_n {
        let w = opts.weights[n];
        if w == 0.0 {
            continue;
        }
        if matches[n] == 0 || totals[n] == 0 {
            return Ok(0.0);
        }
        log_sum += w * (matches[n] as f64 / totals[n] as f64).ln();
    }

    let bp = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(bp * log_sum.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_is_one() {
        let c = vec![words("the cat sat on the mat"), words("a b c d e")];
        assert_eq!(corpus_bleu(&c, &c, &BleuOptions::default()).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_is_zero() {
        let c = vec![words("a b c d")];
        let r = vec![words("e f g h")];
        assert_eq!(corpus_bleu(&c, &r, &BleuOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty() {
        let c = vec![words("a b")];
        let r = vec![words("a b c d")];
        let bleu = corpus_bleu(&c, &r, &BleuOptions::uniform(1)).unwrap();
        assert!((bleu - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn clipping() {
        let c = vec![words("the the the the")];
        let r = vec![words("the cat")];
        let clipped = corpus_bleu(&c, &r, &BleuOptions::uniform(1)).unwrap();
        assert!((clipped - 0.25).abs() < 1e-12);
        let raw = BleuOptions {
            clipped: false,
            ..BleuOptions::uniform(1)
        };
        assert_eq!(corpus_bleu(&c, &r, &raw).unwrap(), 1.0);
    }

    #[test]
    fn parameter_errors() {
        let c = vec![words("a")];
        let empty: Vec<Vec<&str>> = Vec::new();
        assert!(corpus_bleu(&empty, &empty, &BleuOptions::default()).is_err());
        assert!(corpus_bleu(&c, &[c[0].clone(), c[0].clone()], &BleuOptions::default()).is_err());
        let bad = BleuOptions {
            weights: vec![0.5, 0.1],
            ..BleuOptions::uniform(2)
        };
        assert!(corpus_bleu(&c, &c, &bad).is_err());
    }

    #[test]
    fn stats_reject_mismatched_corpus() {
        let pass = vec![SymbolSequence::from_texts(&["ab"], 0).unwrap()];
        assert!(stats_from_passes(&[&pass], &[0], &["ab"]).is_ok());
        assert!(matches!(
            stats_from_passes(&[&pass], &[0], &["abc"]),
            Err(Error::Contract(_))
        ));
        assert!(stats_from_passes(&[&pass], &[0], &["ab", "c"]).is_err());
    }

    #[test]
    fn stats_unmerged_corpus() {
        let raw = ["ab c", ""];
        let pass: Vec<_> = raw
            .iter()
            .map(|s| crate::model::tokenize_sentence(s, Default::default()))
            .collect();
        let stats = stats_from_passes(&[&pass, &pass], &[3, 5], &raw).unwrap();
        assert_eq!(stats.avg_subword_len, 1.0);
        assert_eq!(stats.compression_ratio, 1.0);
        assert_eq!(stats.multiplicity_passes, 2.0);
        assert_eq!(stats.multiplicity_distinct, 1.0);
        assert_eq!(stats.mean_depth, 4.0);
        assert_eq!(stats.avg_word_len, 1.5);
    }
}
