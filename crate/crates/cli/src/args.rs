use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Acoustic word embedding toolkit.
///
/// Exit codes: 0 success, 1 domain error, 2 usage error.
#[derive(Debug, Parser)]
#[command(name = "awe", version, args_override_self = true)]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// File of `key = value` lines, one per long flag of the subcommand.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for data-parallel work. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic labeled corpus archive.
    SynthData(SynthArgs),
    /// Produce a pair file: simulated term discovery or ground truth.
    MinePairs(MineArgs),
    /// Train on one language from a pair file (or ground truth with --supervised).
    Train(TrainArgs),
    /// Supervised training on pooled labeled languages.
    TrainMulti(TrainMultiArgs),
    /// Adapt a checkpoint to a new language with unsupervised pairs.
    Adapt(AdaptArgs),
    /// Embed every segment of an archive.
    Embed(EmbedArgs),
    /// Same-different average precision of embeddings.
    EvalAp(EvalApArgs),
    /// Same-different average precision of DTW on raw features.
    EvalDtw(EvalDtwArgs),
    /// Linear speaker-identity probe.
    ProbeSpeaker(ProbeArgs),
    /// Write an embedding table for external plotting.
    Export(ExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub types: usize,
    #[arg(long, default_value_t = 5)]
    pub speakers: usize,
    /// Instances of each word type per speaker.
    #[arg(long, default_value_t = 8)]
    pub instances: usize,
    #[arg(long, default_value_t = 15)]
    pub min_len: usize,
    #[arg(long, default_value_t = 30)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.2)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.3)]
    pub gain: f64,
    #[arg(long, default_value_t = 0.5)]
    pub offset: f64,
    #[arg(long, default_value_t = 13)]
    pub dim: usize,
    #[arg(long, default_value = "synth")]
    pub language: String,
    /// Also write `<out>.train`, `<out>.dev` and `<out>.test` with these
    /// fractions, e.g. `0.6,0.2,0.2`.
    #[arg(long, value_name = "TRAIN,DEV,TEST", value_parser = parse_fractions)]
    pub split: Option<[f64; 3]>,
    /// Keep every speaker inside one split part.
    #[arg(long)]
    pub speaker_disjoint: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_fractions(s: &str) -> Result<[f64; 3], String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|v| format!("expected three fractions, got {}", v.len()))
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    /// Noisy pairs at a chosen label precision.
    Utd,
    /// Same-label pairs.
    GroundTruth,
}

#[derive(Debug, Args, Serialize)]
pub struct MineArgs {
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long, value_enum, default_value_t = PairMode::Utd)]
    pub mode: PairMode,
    /// Number of pairs (an upper bound in ground-truth mode; 0 = all).
    #[arg(long, default_value_t = 1000)]
    pub n_pairs: usize,
    /// Fraction of same-word pairs in utd mode.
    #[arg(long, default_value_t = 0.7)]
    pub precision: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    Ae,
    Cae,
    Triplet,
    Contrastive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    /// Freeze the encoder RNN, train the projection, redraw the decoder.
    Cae,
    /// Train every tensor.
    Full,
}

/// Objective, architecture and optimization settings shared by the training commands.
#[derive(Debug, Args, Serialize)]
pub struct Hyper {
    /// Training objective [default: contrastive; adapt: the checkpoint's].
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    /// Autoencoder pretraining epochs before cae training.
    #[arg(long, default_value_t = 5)]
    pub ae_pretrain_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// GRU units per layer (adapt keeps the checkpoint's architecture).
    #[arg(long, default_value_t = 400)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 130)]
    pub emb_dim: usize,
    /// Triplet margin.
    #[arg(long, default_value_t = 0.25)]
    pub margin: f64,
    /// Contrastive softmax temperature.
    #[arg(long, default_value_t = 0.1)]
    pub temperature: f64,
    /// Pairs per contrastive batch.
    #[arg(long, default_value_t = 16)]
    pub pairs_per_batch: usize,
    /// Examples per reconstruction batch.
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Word types per triplet batch.
    #[arg(long, default_value_t = 8)]
    pub pk_types: usize,
    /// Instances per type in a triplet batch.
    #[arg(long, default_value_t = 4)]
    pub pk_instances: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long, default_value_t = 5.0)]
    pub clip_norm: f64,
    /// Dev evaluations without improvement before stopping; 0 disables.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Dev AP counts same-word pairs only across speakers.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub cross_speaker: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub segments: PathBuf,
    /// Pair file; required unless --supervised.
    #[arg(long, required_unless_present = "supervised")]
    pub pairs: Option<PathBuf>,
    /// Train on all ground-truth pairs of the labeled archive instead.
    #[arg(long)]
    pub supervised: bool,
    /// Ground-truth pair cap with --supervised.
    #[arg(long, default_value_t = 300_000)]
    pub pair_cap: usize,
    /// Labeled archive for selecting the best epoch.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainMultiArgs {
    /// Labeled archives, one per training language.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub segments: Vec<PathBuf>,
    /// Labeled archive of a held-out language.
    #[arg(long)]
    pub dev: PathBuf,
    /// Upper bound on pooled ground-truth pairs.
    #[arg(long, default_value_t = 300_000)]
    pub pair_cap: usize,
    #[command(flatten)]
    pub hyper: Hyper,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AdaptArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Full)]
    pub policy: PolicyArg,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the vectors to evaluate come from: `--checkpoint` with `--segments`,
/// `--raw` with `--segments`, or `--embeddings`.
#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = true)]
pub struct Source {
    /// Checkpoint to embed --segments with.
    #[arg(long, requires = "segments")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Use mean-pooled raw features of --segments.
    #[arg(long, requires = "segments", conflicts_with = "checkpoint")]
    pub raw: bool,
    /// Previously written embedding table.
    #[arg(long, conflicts_with_all = ["checkpoint", "segments", "raw"])]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalApArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub cross_speaker: bool,
    /// Result file (JSON); defaults to `eval-ap.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalDtwArgs {
    #[arg(long)]
    pub segments: PathBuf,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub cross_speaker: bool,
    /// Result file (JSON); defaults to `eval-dtw.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Result file (JSON); defaults to `probe-speaker.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: Source,
    /// Keep only these word labels.
    #[arg(long, value_delimiter = ',')]
    pub words: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}
