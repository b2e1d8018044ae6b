//! `lcpseg` command-line interface.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lcpseg::io::{self as lio, SegmentFormat};
use lcpseg::metrics::stats_from_passes;
use lcpseg::pipeline::{self, seeded_rng, RunOutput, TraceFile};
use lcpseg::{
    AlgorithmConfig, BoundaryMode, BpeSegmenter, LcpParams, LcpSegmenter, Model, RunConfig,
    ScriptedLabels, SegmentationStats, TestMode,
};
use serde_json::{Map, Value};

#[derive(Parser, Debug)]
#[command(
    name = "lcpseg",
    version,
    about = "Subword segmentation with BPE, BPE-dropout and LCP-dropout"
)]
struct Cli {
    /// Seed for every random choice; generated and recorded when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Boundary::RespectWordBoundaries)]
    boundary_mode: Boundary,

    /// Corpus file, one sentence per line (stdin when omitted).
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output file (stdout when omitted, where allowed).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// String placed between tokens in segmented output.
    #[arg(long, global = true, default_value = " ")]
    separator: String,

    /// How blanks inside the data are rendered in segmented output.
    #[arg(long, global = true, default_value = "\u{2581}")]
    blank_marker: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Boundary {
    MergeAcrossBlanks,
    RespectWordBoundaries,
}

impl From<Boundary> for BoundaryMode {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::MergeAcrossBlanks => BoundaryMode::MergeAcrossBlanks,
            Boundary::RespectWordBoundaries => BoundaryMode::RespectWordBoundaries,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    GreedyLongestMatch,
    LcpSample,
}

impl From<Mode> for TestMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::GreedyLongestMatch => TestMode::GreedyLongestMatch,
            Mode::LcpSample => TestMode::LcpSample,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn BPE merge rules and write the merge table.
    TrainBpe {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        vocab_size: u64,
        /// Keep merging pairs seen only once.
        #[arg(long)]
        merge_singletons: bool,
    },
    /// Run LCP-dropout; writes the model and one segmented file per pass.
    TrainLcp {
        #[command(flatten)]
        lcp: LcpArgs,
        #[command(flatten)]
        extra: RunExtras,
    },
    /// Segment a corpus with a trained model.
    Segment {
        #[arg(long)]
        model: PathBuf,
        /// BPE-dropout probability (BPE models only).
        #[arg(long, conflicts_with = "test_mode")]
        dropout: Option<f64>,
        /// Test-time strategy (LCP models only).
        #[arg(long, value_enum)]
        test_mode: Option<Mode>,
        /// Top-k fraction for lcp-sample; defaults to the model's k.
        #[arg(long)]
        topk: Option<f64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        max_relabel: Option<u64>,
    },
    /// Run a saved configuration and emit its per-pass corpora.
    Augment {
        #[arg(long)]
        model_config: PathBuf,
        #[command(flatten)]
        extra: RunExtras,
    },
    /// Print segmentation statistics as JSON.
    Stats {
        /// Run this configuration and report on the result.
        #[arg(long, conflicts_with = "passes", required_unless_present = "passes")]
        model_config: Option<PathBuf>,
        /// Recompute from pass files against the raw `--input` corpus.
        #[arg(long, num_args = 1..)]
        passes: Vec<PathBuf>,
        /// Trace JSON giving the depth of each pass.
        #[arg(long, requires = "passes")]
        trace: Option<PathBuf>,
        #[command(flatten)]
        extra: RunExtras,
    },
}

#[derive(Args, Debug)]
struct LcpArgs {
    /// Total vocabulary budget v.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    vocab_size: u64,
    /// Per-pass vocabulary budget l (default v/2).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    partial_vocab: Option<u64>,
    /// Fraction k in (0, 1] of landmark bigrams merged per labeling.
    #[arg(long, default_value_t = lcpseg::lcp::defaults::TOPK)]
    topk: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_passes: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_inner: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_relabel: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    stall_limit: Option<u64>,
}

impl LcpArgs {
    fn params(&self) -> LcpParams {
        let v = self.vocab_size as usize;
        let mut p = LcpParams::with_vocab_size(v);
        p.topk = self.topk;
        if let Some(l) = self.partial_vocab {
            p.partial_vocab = l as usize;
        }
        if let Some(n) = self.max_passes {
            p.max_passes = n as usize;
        }
        if let Some(n) = self.max_inner {
            p.max_inner = n as usize;
        }
        if let Some(n) = self.max_relabel {
            p.max_relabel = n as usize;
        }
        if let Some(n) = self.stall_limit {
            p.stall_limit = n as usize;
        }
        p
    }
}

#[derive(Args, Debug)]
struct RunExtras {
    /// Also write the statistics JSON to this file.
    #[arg(long)]
    stats_json: Option<PathBuf>,
    /// Replay scripted labelings (JSON array of {entry: bit}) instead of
    /// drawing them at random.
    #[arg(long, hide = true)]
    replay_labels: Option<PathBuf>,
}

impl RunExtras {
    fn labels(&self) -> anyhow::Result<Option<ScriptedLabels>> {
        self.replay_labels
            .as_deref()
            .map(|p| {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                Ok(ScriptedLabels::from_json(&text)?)
            })
            .transpose()
    }
}

fn read_input(input: Option<&Path>) -> anyhow::Result<Vec<String>> {
    Ok(match input {
        Some(p) if p != Path::new("-") => lio::read_raw_corpus(p)?,
        _ => lio::read_lines(io::stdin().lock())?,
    })
}

fn open_output(output: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn stats_json(stats: &SegmentationStats, config: Option<&RunConfig>) -> anyhow::Result<Value> {
    let mut obj = Map::new();
    if let Some(config) = config {
        if let Value::Object(c) = serde_json::to_value(config)? {
            obj.extend(c);
        }
    }
    if let Value::Object(s) = serde_json::to_value(stats)? {
        obj.extend(s);
    }
    Ok(Value::Object(obj))
}

fn print_table(stats: &SegmentationStats) {
    let rows = [
        ("passes", stats.multiplicity_passes),
        ("distinct/sentence", stats.multiplicity_distinct),
        ("mean depth", stats.mean_depth),
        ("ave./subword", stats.avg_subword_len),
        ("ave./word", stats.avg_word_len),
        ("compression", stats.compression_ratio),
    ];
    eprintln!("{:<20} {:>12}", "statistic", "value");
    for (name, value) in rows {
        eprintln!("{name:<20} {value:>12.4}");
    }
    eprintln!("{:<20} {:>12}", "sentences", stats.sentences);
}

fn emit_stats(
    stats: &SegmentationStats,
    config: Option<&RunConfig>,
    stats_path: Option<&Path>,
    to_stdout: bool,
) -> anyhow::Result<()> {
    let json = stats_json(stats, config)?;
    if let Some(p) = stats_path {
        std::fs::write(p, format!("{json}\n"))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if to_stdout {
        println!("{json}");
    }
    print_table(stats);
    Ok(())
}

struct Ctx {
    seed: u64,
    boundary_mode: BoundaryMode,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    format: SegmentFormat,
}

fn run_and_write(ctx: &Ctx, config: &RunConfig, extra: &RunExtras) -> anyhow::Result<()> {
    let raw = read_input(Some(&config.input))?;
    let mut labels = extra.labels()?;
    let (model, result) = pipeline::run_on_lines(
        config,
        &raw,
        labels.as_mut().map(|l| l as &mut dyn lcpseg::LabelSource),
    )?;
    let output = RunOutput { model, result, raw };
    let written = pipeline::write_outputs(config, &output, &ctx.format)?;
    for p in &written.passes {
        eprintln!("wrote {}", p.display());
    }
    eprintln!("wrote {}", written.model.display());
    let stats = lcpseg::compute_stats(&output.result, &output.raw)?;
    emit_stats(&stats, Some(config), extra.stats_json.as_deref(), false)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx {
        seed: cli.seed.unwrap_or_else(rand::random),
        boundary_mode: cli.boundary_mode.into(),
        input: cli.input,
        output: cli.output,
        format: SegmentFormat::new(cli.separator, cli.blank_marker)?,
    };

    match cli.command {
        Command::TrainBpe {
            vocab_size,
            merge_singletons,
        } => {
            let raw = read_input(ctx.input.as_deref())?;
            let corpus = lio::tokenize_corpus(&raw, ctx.boundary_mode);
            let table = lcpseg::train_bpe(
                &corpus,
                lcpseg::BpeTrainOptions {
                    vocab_size: vocab_size as usize,
                    merge_singletons,
                },
            )?;
            lio::write_merge_table(open_output(ctx.output.as_deref())?, &table)?;
        }
        Command::TrainLcp { lcp, extra } => {
            let Some(output) = ctx.output.clone() else {
                bail!(lcpseg::Error::Param("train-lcp requires --output".into()));
            };
            let config = RunConfig {
                algorithm: AlgorithmConfig::LcpDropout(lcp.params()),
                seed: ctx.seed,
                boundary_mode: ctx.boundary_mode,
                input: ctx.input.clone().unwrap_or_else(|| "-".into()),
                output,
            };
            config.algorithm.validate()?;
            run_and_write(&ctx, &config, &extra)?;
        }
        Command::Augment {
            model_config,
            extra,
        } => {
            let config = RunConfig::load(&model_config)?;
            run_and_write(&ctx, &config, &extra)?;
        }
        Command::Segment {
            model,
            dropout,
            test_mode,
            topk,
            max_relabel,
        } => {
            let model = lio::load_model(&model)?;
            let raw = read_input(ctx.input.as_deref())?;
            let corpus = lio::tokenize_corpus(&raw, ctx.boundary_mode);
            let mut rng = seeded_rng(ctx.seed);
            let segmented: Vec<_> = match model {
                Model::Bpe(table) => {
                    if test_mode.is_some() {
                        bail!(lcpseg::Error::Param(
                            "--test-mode needs an LCP model".into()
                        ));
                    }
                    let p = dropout.unwrap_or(0.0);
                    if !(0.0..=1.0).contains(&p) {
                        bail!(lcpseg::Error::Param(format!(
                            "dropout must lie in [0, 1], got {p}"
                        )));
                    }
                    let seg = BpeSegmenter::new(&table);
                    corpus.iter().map(|s| seg.segment(s, p, &mut rng)).collect()
                }
                Model::Lcp(m) => {
                    if dropout.is_some() {
                        bail!(lcpseg::Error::Param("--dropout needs a BPE model".into()));
                    }
                    let k = topk.unwrap_or(m.topk);
                    if !(k > 0.0 && k <= 1.0) {
                        bail!(lcpseg::Error::Param(format!(
                            "topk must lie in (0, 1], got {k}"
                        )));
                    }
                    let mode = test_mode.map(TestMode::from).unwrap_or_default();
                    let mut seg = LcpSegmenter::new(m.vocab, mode, k);
                    if let Some(n) = max_relabel {
                        seg.max_relabel = n as usize;
                    }
                    corpus.iter().map(|s| seg.segment(s, &mut rng)).collect()
                }
            };
            ctx.format
                .write_corpus(open_output(ctx.output.as_deref())?, &segmented)?;
        }
        Command::Stats {
            model_config,
            passes,
            trace,
            extra,
        } => {
            if let Some(path) = model_config {
                let config = RunConfig::load(&path)?;
                let raw = read_input(Some(&config.input))?;
                let mut labels = extra.labels()?;
                let (_, result) = pipeline::run_on_lines(
                    &config,
                    &raw,
                    labels.as_mut().map(|l| l as &mut dyn lcpseg::LabelSource),
                )?;
                let stats = lcpseg::compute_stats(&result, &raw)?;
                emit_stats(&stats, Some(&config), extra.stats_json.as_deref(), true)?;
            } else {
                let raw = read_input(ctx.input.as_deref())?;
                let segs = passes
                    .iter()
                    .map(|p| {
                        let file =
                            File::open(p).with_context(|| format!("opening {}", p.display()))?;
                        Ok(ctx.format.read_corpus(file, ctx.boundary_mode)?)
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                let depths = match trace {
                    Some(t) => {
                        let text = std::fs::read_to_string(&t)
                            .with_context(|| format!("reading {}", t.display()))?;
                        let trace: TraceFile = serde_json::from_str(&text)?;
                        trace.passes.iter().map(|p| p.depth).collect()
                    }
                    None => vec![0; segs.len()],
                };
                let views: Vec<_> = segs.iter().map(Vec::as_slice).collect();
                let stats = stats_from_passes(&views, &depths, &raw)?;
                emit_stats(&stats, None, extra.stats_json.as_deref(), true)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<lcpseg::Error>() {
                Some(lcpseg::Error::Param(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
