use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use awe_core::data::{
    generate_synthetic, ground_truth_pairs, load_pairs, load_segments, save_pairs, save_segments,
    simulate_utd_pairs, split, SplitSpec, SyntheticConfig,
};
use awe_core::eval::{
    dtw_ap, embed_all, export_embeddings, load_embeddings, mean_pooled_features,
    same_different_ap, speaker_probe, EmbeddingSet, ProbeConfig,
};
use awe_core::model::{
    load_checkpoint, save_checkpoint, AdamConfig, AdaptationPolicy, ModelConfig, PolicyKind,
};
use awe_core::objectives::{ContrastiveHyper, Objective, TripletHyper};
use awe_core::training::{
    adapt, train_monolingual, train_multilingual, train_supervised_monolingual, TrainConfig,
    TrainReport,
};
use awe_core::{Checkpoint, PairList, SegmentStore};

use crate::args::*;

/// Everything a command needs besides its own arguments.
pub struct RunContext {
    pub seed: u64,
    pub config_hash: String,
    pub version: &'static str,
}

/// Machine-readable evaluation result.
#[derive(Serialize)]
struct ResultFile<'a> {
    metric: &'a str,
    value: f64,
    n: usize,
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
    /// The full effective command, enough to rerun it.
    config: &'a serde_json::Value,
}

pub fn run(command: &Command, ctx: &RunContext, effective: &serde_json::Value) -> Result<()> {
    match command {
        Command::SynthData(a) => synth_data(a, ctx),
        Command::MinePairs(a) => mine_pairs(a, ctx),
        Command::Train(a) => train(a, ctx),
        Command::TrainMulti(a) => train_multi(a, ctx),
        Command::Adapt(a) => adapt_cmd(a, ctx),
        Command::Embed(a) => embed(a),
        Command::EvalAp(a) => eval_ap(a, ctx, effective),
        Command::EvalDtw(a) => eval_dtw(a, ctx, effective),
        Command::ProbeSpeaker(a) => probe(a, ctx, effective),
        Command::Export(a) => export(a),
    }
}

fn segments(path: &Path) -> Result<SegmentStore> {
    load_segments(path).with_context(|| format!("loading segments from {}", path.display()))
}

fn pairs_file(path: &Path) -> Result<PairList> {
    load_pairs(path).with_context(|| format!("loading pairs from {}", path.display()))
}

fn checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint from {}", path.display()))
}

fn write_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    save_checkpoint(ckpt, path).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn synth_data(a: &SynthArgs, ctx: &RunContext) -> Result<()> {
    let store = generate_synthetic(&SyntheticConfig {
        n_word_types: a.types,
        n_speakers: a.speakers,
        instances_per_type_per_speaker: a.instances,
        template_length_range: (a.min_len, a.max_len),
        length_jitter: a.jitter,
        noise_sigma: a.noise,
        speaker_gain_sigma: a.gain,
        speaker_offset_sigma: a.offset,
        feature_dim: a.dim,
        language_id: a.language.clone(),
        seed: ctx.seed,
    })?;
    save_segments(&store, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("segments={}", store.len());
    println!("speakers={}", store.speakers().len());
    if let Some(f) = &a.split {
        let spec = SplitSpec {
            fractions: *f,
            speaker_disjoint: a.speaker_disjoint,
            seed: ctx.seed,
        };
        let (train, dev, test) = split(&store, &spec)?;
        for (name, part) in [("train", &train), ("dev", &dev), ("test", &test)] {
            let path = with_suffix(&a.out, &format!(".{name}"));
            save_segments(part, &path).with_context(|| format!("writing {}", path.display()))?;
            println!("{name}_segments={}", part.len());
        }
    }
    Ok(())
}

fn mine_pairs(a: &MineArgs, ctx: &RunContext) -> Result<()> {
    let store = segments(&a.segments)?;
    let pairs = match a.mode {
        PairMode::Utd => simulate_utd_pairs(&store, a.n_pairs, a.precision, ctx.seed)?,
        PairMode::GroundTruth => {
            ground_truth_pairs(&store, (a.n_pairs > 0).then_some(a.n_pairs), ctx.seed)?
        }
    };
    save_pairs(&pairs, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("pairs={}", pairs.len());
    println!("label_precision={:.6}", pairs.label_precision(&store)?);
    Ok(())
}

fn objective(o: ObjectiveArg) -> Objective {
    match o {
        ObjectiveArg::Ae => Objective::Ae,
        ObjectiveArg::Cae => Objective::Cae,
        ObjectiveArg::Triplet => Objective::Triplet,
        ObjectiveArg::Contrastive => Objective::Contrastive,
    }
}

fn train_config(h: &Hyper, pair_cap: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        objective: objective(h.objective.unwrap_or(ObjectiveArg::Contrastive)),
        epochs: h.epochs,
        ae_pretrain_epochs: h.ae_pretrain_epochs,
        batch_size: h.batch_size,
        pk_types: h.pk_types,
        pk_instances: h.pk_instances,
        triplet: TripletHyper { margin: h.margin },
        contrastive: ContrastiveHyper {
            temperature: h.temperature,
            pairs_per_batch: h.pairs_per_batch,
            symmetrize: false,
        },
        adam: AdamConfig {
            lr: h.lr,
            ..AdamConfig::default()
        },
        clip_norm: (h.clip_norm > 0.0).then_some(h.clip_norm),
        patience: (h.patience > 0).then_some(h.patience),
        cross_speaker: h.cross_speaker,
        pair_cap,
        seed,
        model: ModelConfig {
            hidden_dim: h.hidden,
            n_layers: h.layers,
            embedding_dim: h.emb_dim,
            ..ModelConfig::default()
        },
    }
}

fn report(r: &TrainReport) {
    println!("epochs_run={}", r.epoch_losses.len());
    println!("steps={}", r.steps);
    if let Some(l) = r.epoch_losses.last() {
        println!("final_loss={l:.6}");
    }
    if let Some(e) = r.best_epoch {
        println!("best_epoch={e}");
        println!("best_dev_ap={:.6}", r.dev_ap[e]);
    }
    println!("wall_clock_s={:.2}", r.wall_clock.as_secs_f64());
}

fn optional_store(path: &Option<PathBuf>) -> Result<Option<SegmentStore>> {
    path.as_deref().map(segments).transpose()
}

fn train(a: &TrainArgs, ctx: &RunContext) -> Result<()> {
    let store = segments(&a.segments)?;
    let dev = optional_store(&a.dev)?;
    let config = train_config(&a.hyper, a.pair_cap, ctx.seed);
    let (ckpt, r) = if a.supervised {
        train_supervised_monolingual(&store, &config, dev.as_ref())?
    } else {
        let path = a.pairs.as_ref().expect("clap enforces --pairs without --supervised");
        let pairs = pairs_file(path)?;
        train_monolingual(&store, &pairs, &config, dev.as_ref())?
    };
    write_checkpoint(&ckpt, &a.out)?;
    report(&r);
    Ok(())
}

fn train_multi(a: &TrainMultiArgs, ctx: &RunContext) -> Result<()> {
    let stores = a.segments.iter().map(|p| segments(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SegmentStore> = stores.iter().collect();
    let dev = segments(&a.dev)?;
    let config = train_config(&a.hyper, a.pair_cap, ctx.seed);
    let (ckpt, r) = train_multilingual(&refs, &config, &dev)?;
    write_checkpoint(&ckpt, &a.out)?;
    println!("languages={}", ckpt.provenance.source_languages.join(","));
    report(&r);
    Ok(())
}

fn adapt_cmd(a: &AdaptArgs, ctx: &RunContext) -> Result<()> {
    let ckpt = checkpoint(&a.checkpoint)?;
    let store = segments(&a.segments)?;
    let pairs = pairs_file(&a.pairs)?;
    let dev = optional_store(&a.dev)?;
    let mut config = train_config(&a.hyper, 1, ctx.seed);
    // architecture and, unless overridden, objective come from the checkpoint
    config.model = ckpt.config().clone();
    if a.hyper.objective.is_none() {
        config.objective = ckpt.provenance.objective;
    }
    let policy = AdaptationPolicy {
        kind: match a.policy {
            PolicyArg::Cae => PolicyKind::CaePolicy,
            PolicyArg::Full => PolicyKind::FullFinetune,
        },
        reinit_seed: ctx.seed,
    };
    let (adapted, r) = adapt(&ckpt, &store, &pairs, &policy, &config, dev.as_ref())?;
    write_checkpoint(&adapted, &a.out)?;
    report(&r);
    Ok(())
}

fn embed(a: &EmbedArgs) -> Result<()> {
    let ckpt = checkpoint(&a.checkpoint)?;
    let set = embed_all(&ckpt.params, &segments(&a.segments)?)?;
    export_embeddings(&set, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("embeddings={}", set.len());
    println!("dim={}", set.dim().unwrap_or(0));
    Ok(())
}

fn load_source(s: &Source) -> Result<EmbeddingSet> {
    if let Some(path) = &s.embeddings {
        return load_embeddings(path).with_context(|| format!("loading embeddings from {}", path.display()));
    }
    if s.checkpoint.is_none() && !s.raw {
        bail!("--segments needs either --checkpoint or --raw");
    }
    let store = segments(s.segments.as_ref().expect("clap requires a source"))?;
    match &s.checkpoint {
        Some(ck) => Ok(embed_all(&checkpoint(ck)?.params, &store)?),
        None => Ok(mean_pooled_features(&store)),
    }
}

fn write_result(
    out: &Option<PathBuf>,
    default: &str,
    result: ResultFile<'_>,
) -> Result<()> {
    let path = out.clone().unwrap_or_else(|| PathBuf::from(default));
    let text = serde_json::to_string_pretty(&result)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn eval_ap(a: &EvalApArgs, ctx: &RunContext, effective: &serde_json::Value) -> Result<()> {
    let set = load_source(&a.source)?;
    let r = same_different_ap(&set, a.cross_speaker)?;
    println!("ap={:.6}", r.ap);
    println!("positive_pairs={}", r.n_positive_pairs);
    println!("pairs={}", r.n_total_pairs);
    write_result(
        &a.out,
        "eval-ap.json",
        ResultFile {
            metric: "same_different_ap",
            value: r.ap,
            n: set.len(),
            config_hash: &ctx.config_hash,
            seed: ctx.seed,
            version: ctx.version,
            config: effective,
        },
    )
}

fn eval_dtw(a: &EvalDtwArgs, ctx: &RunContext, effective: &serde_json::Value) -> Result<()> {
    let store = segments(&a.segments)?;
    let r = dtw_ap(&store, a.cross_speaker)?;
    println!("ap={:.6}", r.ap);
    println!("positive_pairs={}", r.n_positive_pairs);
    println!("pairs={}", r.n_total_pairs);
    write_result(
        &a.out,
        "eval-dtw.json",
        ResultFile {
            metric: "dtw_same_different_ap",
            value: r.ap,
            n: store.len(),
            config_hash: &ctx.config_hash,
            seed: ctx.seed,
            version: ctx.version,
            config: effective,
        },
    )
}

fn probe(a: &ProbeArgs, ctx: &RunContext, effective: &serde_json::Value) -> Result<()> {
    let set = load_source(&a.source)?;
    let config = ProbeConfig {
        train_fraction: a.train_fraction,
        seed: ctx.seed,
        ..ProbeConfig::default()
    };
    let r = speaker_probe(&set, &config)?;
    println!("accuracy={:.6}", r.accuracy);
    println!("speakers={}", r.n_speakers);
    println!("train={}", r.n_train);
    println!("test={}", r.n_test);
    write_result(
        &a.out,
        "probe-speaker.json",
        ResultFile {
            metric: "speaker_probe_accuracy",
            value: r.accuracy,
            n: r.n_test,
            config_hash: &ctx.config_hash,
            seed: ctx.seed,
            version: ctx.version,
            config: effective,
        },
    )
}

fn export(a: &ExportArgs) -> Result<()> {
    let set = load_source(&a.source)?;
    let set = if a.words.is_empty() {
        set
    } else {
        EmbeddingSet::from_entries(
            set.entries()
                .iter()
                .filter(|e| e.word_label.as_ref().is_some_and(|w| a.words.contains(w)))
                .cloned(),
        )?
    };
    export_embeddings(&set, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("rows={}", set.len());
    Ok(())
}
