//! End-to-end runs: train, segment every pass, and write the results.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bpe::{train_bpe, BpeSegmenter, BpeTrainOptions};
use crate::config::{AlgorithmConfig, RunConfig};
use crate::error::{Error, Result};
use crate::io::{self, LcpModel, Model, SegmentFormat};
use crate::lcp::{
    lcp_dropout, LabelSource, MultiSegmentation, PassEnd, PassRecord, PassTrace, RngLabels,
    Termination,
};
use crate::model::{SymbolSequence, Vocabulary};

/// The generator every run draws from.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct RunOutput {
    pub model: Model,
    pub result: MultiSegmentation,
    pub raw: Vec<String>,
}

/// Per-pass traces as written next to the pass files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub termination: Termination,
    pub passes: Vec<PassTrace>,
    pub global_vocab_size: usize,
}

fn bpe_passes(
    corpus: &[SymbolSequence],
    vocab_size: usize,
    merge_singletons: bool,
    dropout: f64,
    passes: usize,
    seed: u64,
) -> Result<(Model, MultiSegmentation)> {
    let table = train_bpe(
        corpus,
        BpeTrainOptions {
            vocab_size,
            merge_singletons,
        },
    )?;
    let segmenter = BpeSegmenter::new(&table);
    let mut rng = seeded_rng(seed);
    let records = (0..passes)
        .map(|_| {
            let segmentation: Vec<_> = corpus
                .iter()
                .map(|s| segmenter.segment(s, dropout, &mut rng))
                .collect();
            let used: BTreeSet<&str> = segmentation
                .iter()
                .flat_map(|s| s.tokens.iter().map(|t| t.text()))
                .collect();
            let vocab = used.into_iter().collect();
            PassRecord {
                segmentation,
                vocab,
                trace: PassTrace {
                    depth: 0,
                    added_per_depth: Vec::new(),
                    relabel_retries: 0,
                    end: PassEnd::Budget,
                },
            }
        })
        .collect();
    let result = MultiSegmentation {
        passes: records,
        global_vocab: table.vocabulary(),
        termination: Termination::Budget,
    };
    Ok((Model::Bpe(table), result))
}

/// Runs `config` over already-read lines. `labels` replaces the seeded
/// label source for LCP-dropout when given.
pub fn run_on_lines(
    config: &RunConfig,
    raw: &[String],
    labels: Option<&mut dyn LabelSource>,
) -> Result<(Model, MultiSegmentation)> {
    config.algorithm.validate()?;
    let corpus = io::tokenize_corpus(raw, config.boundary_mode);
    match &config.algorithm {
        AlgorithmConfig::Bpe {
            vocab_size,
            merge_singletons,
        } => bpe_passes(&corpus, *vocab_size, *merge_singletons, 0.0, 1, config.seed),
        AlgorithmConfig::BpeDropout {
            vocab_size,
            merge_singletons,
            dropout,
            passes,
        } => bpe_passes(
            &corpus,
            *vocab_size,
            *merge_singletons,
            *dropout,
            *passes,
            config.seed,
        ),
        AlgorithmConfig::LcpDropout(params) => {
            let mut rng_labels = RngLabels::new(seeded_rng(config.seed));
            let source: &mut dyn LabelSource = match labels {
                Some(l) => l,
                None => &mut rng_labels,
            };
            let result = lcp_dropout(&corpus, params, source)?;
            let model = Model::Lcp(LcpModel {
                vocab_size: params.vocab_size,
                partial_vocab: params.partial_vocab,
                topk: params.topk,
                seed: config.seed,
                vocab: result.global_vocab.clone(),
            });
            Ok((model, result))
        }
    }
}

pub fn run(config: &RunConfig, labels: Option<&mut dyn LabelSource>) -> Result<RunOutput> {
    let raw = io::read_raw_corpus(&config.input)?;
    let (model, result) = run_on_lines(config, &raw, labels)?;
    Ok(RunOutput { model, result, raw })
}

/// Paths written by [`write_outputs`].
#[derive(Clone, Debug)]
pub struct WrittenFiles {
    pub model: PathBuf,
    pub passes: Vec<PathBuf>,
    pub config: PathBuf,
    pub trace: PathBuf,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes the model to `config.output` and, next to it, one file per pass,
/// the run configuration and the pass traces.
pub fn write_outputs(
    config: &RunConfig,
    output: &RunOutput,
    fmt: &SegmentFormat,
) -> Result<WrittenFiles> {
    if let Some(dir) = config.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    io::save_model(&output.model, &config.output)?;
    let stem = config.stem();
    let passes = io::write_passes(
        &stem,
        output
            .result
            .passes
            .iter()
            .map(|p| p.segmentation.as_slice()),
        fmt,
    )?;
    let config_path = with_suffix(&stem, ".config.json");
    config.save(&config_path)?;
    let trace_path = with_suffix(&stem, ".trace.json");
    let trace = TraceFile {
        termination: output.result.termination,
        passes: output
            .result
            .passes
            .iter()
            .map(|p| p.trace.clone())
            .collect(),
        global_vocab_size: output.result.global_vocab.len(),
    };
    let mut text = serde_json::to_string_pretty(&trace)?;
    text.push('\n');
    std::fs::write(&trace_path, text).map_err(|e| Error::file(&trace_path, e))?;
    Ok(WrittenFiles {
        model: config.output.clone(),
        passes,
        config: config_path,
        trace: trace_path,
    })
}

/// Vocabulary of a model, for test-time segmentation.
pub fn model_vocabulary(model: &Model) -> Vocabulary {
    match model {
        Model::Bpe(t) => t.vocabulary(),
        Model::Lcp(m) => m.vocab.clone(),
    }
}
