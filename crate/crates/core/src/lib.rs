//! Subword segmentation toolkit: BPE, BPE-dropout and LCP-dropout.
//!
//! LCP-dropout labels every vocabulary entry with a random bit and merges
//! adjacent tokens labeled `1 0`, gated by bigram frequency. Each pass
//! restarts from the raw symbols, so repeated passes yield several
//! different, individually consistent segmentations of one corpus.
//!
//! ```
//! use lcpseg::{lcp_dropout, tokenize_sentence, BoundaryMode, LcpParams, RngLabels};
//! use rand::SeedableRng;
//!
//! let corpus = vec![tokenize_sentence("abracadabra abracadabra", BoundaryMode::default())];
//! let mut labels = RngLabels::new(rand_chacha::ChaCha8Rng::seed_from_u64(7));
//! let out = lcp_dropout(&corpus, &LcpParams::new(12, 8, 0.5), &mut labels).unwrap();
//! for pass in &out.passes {
//!     assert_eq!(pass.segmentation[0].surface(), "abracadabra abracadabra");
//! }
//! ```

pub mod bpe;
pub mod config;
pub mod error;
mod intern;
pub mod io;
pub mod lcp;
pub mod metrics;
pub mod model;
pub mod pipeline;

pub use bpe::{
    apply_bpe, count_bigrams, merge_all, most_frequent_bigram, train_bpe, BpeSegmenter,
    BpeTrainOptions, MergeRule, MergeTable,
};
pub use config::{AlgorithmConfig, RunConfig};
pub use error::{Error, Result};
pub use io::{load_corpus, load_model, save_model, LcpModel, Model, SegmentFormat};
pub use lcp::{
    assign_labels, lcp_dropout, lcp_step, segment_test_time, select_candidates, Candidate,
    LabelSource, Labeling, LcpParams, LcpSegmenter, MultiSegmentation, PassEnd, PassRecord,
    PassTrace, RngLabels, ScriptedLabels, Termination, TestMode,
};
pub use metrics::{compute_stats, corpus_bleu, BleuOptions, SegmentationStats};
pub use model::{
    tokenize_sentence, validate_segmentation, BoundaryMode, FreqTable, SymbolSequence, Token,
    Vocabulary,
};
