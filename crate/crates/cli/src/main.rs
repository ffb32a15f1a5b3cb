//! Pipeline driver.
//!
//! Every command works inside one run directory (`--run`), laid out as
//! inputs/, corpus/, model/, results/ with a manifest.json recording what
//! each stage ran with. Stages check their prerequisites through the
//! manifest and skip themselves when nothing they depend on has changed.

mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use adoptvec::adopter::{evaluate_adopter_prediction, AdopterEvalConfig, Scorer};
use adoptvec::corpus::{generate_corpus, CorpusConfig, WalkCorpus};
use adoptvec::embed::{NeighborIndex, NormalizedEmbeddings};
use adoptvec::geo::{evaluate_geo, GeoEvalConfig, LogisticConfig};
use adoptvec::ingest::{
    group_into_sequences, parse_adoption_log, parse_follower_network, parse_geo_labels,
    split_topics, AdoptionSequence, FollowerNetwork, ParseMode, TopicSplit,
};
use adoptvec::neighborhood::{
    compare_neighborhood_coadoption, mean_jaccard_overlap, project_sample, write_projection,
    AdoptionMap,
};
use adoptvec::skipgram::{train, RawEmbeddings, TrainConfig, TrainMode};
use adoptvec::synth::{self, SynthConfig};

use manifest::{sha256_file, LockGuard, RunManifest, StageRecord};

// Run-relative artifact paths. One stage's outputs are the next one's
// inputs; the manifest stores digests under these names.
const ADOPTIONS: &str = "inputs/adoptions.tsv";
const FOLLOWS: &str = "inputs/follows.tsv";
const GEO: &str = "inputs/geo.tsv";
const SPLIT: &str = "inputs/split.tsv";
const WALKS: &str = "corpus/walks.txt";
const MODEL: &str = "model/embeddings.txt";
const ADOPTER_TABLE: &str = "results/adopter_precision.tsv";
const ADOPTER_HISTOGRAM: &str = "results/adopter_histogram.tsv";
const GEO_TABLE: &str = "results/geo_accuracy.tsv";
const JACCARD_TABLE: &str = "results/jaccard.tsv";
const COADOPTION_TABLE: &str = "results/coadoption_scatter.tsv";
const PROJECTION_TABLE: &str = "results/projection.tsv";
const PROJECTION_VECTORS: &str = "results/projection_vectors.txt";

#[derive(Parser)]
#[command(
    name = "adoptvec",
    version,
    about = "User embeddings from topic-adoption cascades"
)]
struct Cli {
    /// Run directory (created on demand) holding inputs/, corpus/, model/,
    /// results/ and the stage manifest.
    #[arg(long, global = true, default_value = "run")]
    run: PathBuf,

    /// Re-run the stage even if the manifest says it is up to date.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic adoption log, follower network, and geo labels
    /// with planted communities.
    Synth(SynthArgs),
    /// Validate raw input files, copy them into the run directory, and
    /// split topics into train and test.
    Ingest(IngestArgs),
    /// Build per-topic temporal graphs over the train split and sample the
    /// random-walk corpus.
    Corpus(CorpusArgs),
    /// Train user embeddings on the walk corpus.
    Train(TrainArgs),
    /// Precision@k of ranked adopter prediction on held-out topics.
    EvalAdopters(EvalAdoptersArgs),
    /// Accuracy of location classification from embedding features.
    EvalGeo(EvalGeoArgs),
    /// Neighborhood overlap and co-adoption statistics, network vs vector
    /// space.
    Analyze(AnalyzeArgs),
    /// 2-D PCA coordinates plus raw vectors for external plotting.
    ExportProjection(ExportProjectionArgs),
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Planted communities.
    #[arg(long, default_value_t = 5)]
    communities: usize,
    #[arg(long, default_value_t = 40)]
    users_per_community: usize,
    /// Topics homed in each community.
    #[arg(long, default_value_t = 80)]
    topics_per_community: usize,
    /// Probability an adopter is drawn outside the topic's home community.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Adopters per topic, uniform in [min, max].
    #[arg(long, default_value_t = 20)]
    adopters_min: usize,
    #[arg(long, default_value_t = 30)]
    adopters_max: usize,
    /// Mean inter-adoption gap in seconds.
    #[arg(long, default_value_t = 600.0)]
    mean_gap: f64,
    #[arg(long, default_value_t = 10)]
    follows_per_user: usize,
    /// Probability a follow edge leaves the follower's community.
    #[arg(long, default_value_t = 0.05)]
    follow_cross: f64,
}

#[derive(Args, Serialize)]
struct IngestArgs {
    /// Adoption log: `topic_id<TAB>user_id<TAB>unix_seconds` lines.
    /// Defaults to the synth output already in inputs/.
    #[arg(long)]
    #[serde(skip)]
    adoptions: Option<PathBuf>,
    /// Follower edges: `follower_id<TAB>followee_id` lines. Optional, but
    /// needed later for the network baselines and `analyze`.
    #[arg(long)]
    #[serde(skip)]
    follows: Option<PathBuf>,
    /// Geo labels: `user_id<TAB>label` lines. Optional, needed for
    /// `eval-geo`.
    #[arg(long)]
    #[serde(skip)]
    geo: Option<PathBuf>,
    /// Skip malformed lines (counted) instead of failing on the first one.
    #[arg(long)]
    lenient: bool,
    /// Fraction of topics assigned to the training split.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Seed for the topic split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct CorpusArgs {
    /// Maximum gap in seconds between two adoptions linked by an edge.
    #[arg(long, default_value_t = 3600)]
    tau: i64,
    /// Walk length in nodes; one walk is sampled per node.
    #[arg(long, default_value_t = 10)]
    gamma: usize,
    /// Seed for walk sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Embedding dimension.
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Context window: tokens within this many positions train together.
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Frequency threshold for subsampling common users; 0 disables.
    #[arg(long, default_value_t = 1e-4)]
    subsample: f64,
    /// Training objective.
    #[arg(long, value_enum, default_value_t = ModeArg::Hs)]
    mode: ModeArg,
    /// Noise draws per pair (ns mode only).
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Initial learning rate, decayed linearly to 1e-4 of itself.
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    /// Drop users appearing fewer times than this in the corpus.
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// 1 = deterministic; more workers update the matrices lock-free and
    /// results vary run to run.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Shrink the window uniformly at random per center token.
    #[arg(long)]
    dynamic_window: bool,
    /// Seed for initialization, subsampling, and pair shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum ModeArg {
    /// Huffman-tree hierarchical softmax.
    Hs,
    /// Negative sampling.
    Ns,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum ScorerArg {
    /// Minimum distance to any seed adopter.
    Min,
    /// Mean distance over all seed adopters.
    Avg,
}

#[derive(Args, Serialize)]
struct EvalAdoptersArgs {
    /// Seed-set sizes; repeat or comma-separate for several table rows.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50])]
    n: Vec<usize>,
    /// List length scored by Precision@k.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// How per-seed distances combine into a candidate score.
    #[arg(long, value_enum, default_value_t = ScorerArg::Avg)]
    scorer: ScorerArg,
    /// Neighbors fetched per embedded seed; defaults to 10*k.
    #[arg(long)]
    fanout: Option<usize>,
    /// Distinct-adopter threshold for a test topic to qualify.
    #[arg(long, default_value_t = 500)]
    min_adopters: usize,
    /// Evaluate at most this many qualifying topics.
    #[arg(long, default_value_t = 100)]
    sample: usize,
    /// Seed for topic sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-topic table destination, replacing results/adopter_precision.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EvalGeoArgs {
    /// Fraction of labeled users used for training; repeat to sweep.
    #[arg(long = "train-fraction", value_delimiter = ',', default_values_t = [0.01, 0.05, 0.10])]
    train_fraction: Vec<f64>,
    /// Evaluate on at most this many labeled embedded users; 0 means all.
    #[arg(long, default_value_t = 0)]
    sample: usize,
    /// L2 regularization strength for the logistic model.
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    /// Seed for user sampling and the train/test splits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accuracy table destination, replacing results/geo_accuracy.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    /// Users sampled for the follower/k-NN Jaccard overlap; 0 means all.
    #[arg(long, default_value_t = 1000)]
    jaccard_sample: usize,
    /// Users sampled for the co-adoption comparison; 0 means all.
    #[arg(long, default_value_t = 10000)]
    coadoption_sample: usize,
    /// Seed for both samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scatter destination, replacing results/coadoption_scatter.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExportProjectionArgs {
    /// Users to project; 0 means all. Errors when larger than the
    /// vocabulary.
    #[arg(long, default_value_t = 0)]
    sample: usize,
    /// Add a column flagging this topic's adopters.
    #[arg(long)]
    topic: Option<String>,
    /// Seed for the user sample.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coordinates destination, replacing results/projection.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let dirs = RunDir::new(cli.run)?;
    let _lock = LockGuard::acquire(&dirs.root)?;
    let mut manifest = RunManifest::load(&dirs.root)?;
    match cli.command {
        Command::Synth(args) => cmd_synth(&dirs, &mut manifest, cli.force, args),
        Command::Ingest(args) => cmd_ingest(&dirs, &mut manifest, cli.force, args),
        Command::Corpus(args) => cmd_corpus(&dirs, &mut manifest, cli.force, args),
        Command::Train(args) => cmd_train(&dirs, &mut manifest, cli.force, args),
        Command::EvalAdopters(args) => cmd_eval_adopters(&dirs, &mut manifest, cli.force, args),
        Command::EvalGeo(args) => cmd_eval_geo(&dirs, &mut manifest, cli.force, args),
        Command::Analyze(args) => cmd_analyze(&dirs, &mut manifest, cli.force, args),
        Command::ExportProjection(args) => {
            cmd_export_projection(&dirs, &mut manifest, cli.force, args)
        }
    }
}

struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn new(root: PathBuf) -> Result<Self> {
        for sub in ["inputs", "corpus", "model", "results"] {
            fs::create_dir_all(root.join(sub))
                .with_context(|| format!("cannot create {}", root.join(sub).display()))?;
        }
        Ok(RunDir { root })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

/// Skip the stage when the manifest already shows this exact record
/// completed; otherwise remember it and report false so the caller runs.
fn up_to_date(
    dirs: &RunDir,
    manifest: &RunManifest,
    force: bool,
    stage: &str,
    record: &StageRecord,
) -> bool {
    if !force && manifest.is_current(&dirs.root, stage, record) {
        println!("{stage} is up to date; use --force to re-run");
        true
    } else {
        false
    }
}

fn finish(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    stage: &str,
    record: StageRecord,
) -> Result<()> {
    manifest.record(stage, record);
    manifest.save(&dirs.root)
}

/// Digest the named run files into a manifest input map.
fn digest_inputs(dirs: &RunDir, names: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for name in names {
        map.insert((*name).to_string(), sha256_file(&dirs.path(name))?);
    }
    Ok(map)
}

/// Where a table goes: `--out` wins, else the default results/ slot. The
/// recorded name keeps `--out` paths absolute so existence checks work from
/// any working directory.
fn table_target(dirs: &RunDir, out: &Option<PathBuf>, default: &str) -> Result<(PathBuf, String)> {
    match out {
        Some(p) => {
            let abs = std::path::absolute(p)
                .with_context(|| format!("cannot resolve --out {}", p.display()))?;
            Ok((abs.clone(), abs.display().to_string()))
        }
        None => Ok((dirs.path(default), default.to_string())),
    }
}

fn none_if_zero(n: usize) -> Option<usize> {
    if n == 0 {
        None
    } else {
        Some(n)
    }
}

fn cmd_synth(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: SynthArgs,
) -> Result<()> {
    let cfg = SynthConfig {
        num_communities: args.communities,
        users_per_community: args.users_per_community,
        topics_per_community: args.topics_per_community,
        cross_community_noise: args.noise,
        adopters_min: args.adopters_min,
        adopters_max: args.adopters_max,
        mean_gap_seconds: args.mean_gap,
        follows_per_user: args.follows_per_user,
        follow_cross_fraction: args.follow_cross,
        rng_seed: args.seed,
    };
    cfg.validate()?;
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs: BTreeMap::new(),
        outputs: vec![ADOPTIONS.into(), FOLLOWS.into(), GEO.into()],
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "synth", &record) {
        return Ok(());
    }

    let data = synth::generate(&cfg)?;
    data.write_to_dir(dirs.path("inputs"))?;
    let events: usize = data.sequences.iter().map(|s| s.len()).sum();
    println!(
        "synthesized {} users in {} communities: {} adoption events over {} topics, {} follow edges",
        cfg.total_users(),
        cfg.num_communities,
        events,
        data.sequences.len(),
        data.network.edge_count()
    );
    finish(dirs, manifest, "synth", record)
}

fn cmd_ingest(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: IngestArgs,
) -> Result<()> {
    let mode = if args.lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    };

    let adoptions_src = match &args.adoptions {
        Some(p) => p.clone(),
        None => {
            let fallback = dirs.path(ADOPTIONS);
            if !fallback.exists() {
                bail!("no adoption log: pass --adoptions <file> or run `adoptvec synth` first");
            }
            fallback
        }
    };
    let follows_src = optional_source(dirs, &args.follows, FOLLOWS);
    let geo_src = optional_source(dirs, &args.geo, GEO);

    // Digests are taken from the sources, so re-pointing --adoptions at a
    // byte-identical file still counts as up to date.
    let mut inputs = BTreeMap::new();
    inputs.insert(ADOPTIONS.to_string(), sha256_file(&adoptions_src)?);
    if let Some(p) = &follows_src {
        inputs.insert(FOLLOWS.to_string(), sha256_file(p)?);
    }
    if let Some(p) = &geo_src {
        inputs.insert(GEO.to_string(), sha256_file(p)?);
    }

    let mut outputs = vec![ADOPTIONS.to_string(), SPLIT.to_string()];
    if follows_src.is_some() {
        outputs.push(FOLLOWS.to_string());
    }
    if geo_src.is_some() {
        outputs.push(GEO.to_string());
    }
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs,
        outputs,
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "ingest", &record) {
        return Ok(());
    }

    copy_into_run(&adoptions_src, &dirs.path(ADOPTIONS))?;
    if let Some(p) = &follows_src {
        copy_into_run(p, &dirs.path(FOLLOWS))?;
    }
    if let Some(p) = &geo_src {
        copy_into_run(p, &dirs.path(GEO))?;
    }

    let (events, skipped) = parse_adoption_log(dirs.path(ADOPTIONS), mode)?;
    let sequences = group_into_sequences(events);
    let topics: BTreeSet<String> = sequences.iter().map(|s| s.topic_id.clone()).collect();
    let split = split_topics(&topics, args.train_fraction, args.seed)?;
    split.save(dirs.path(SPLIT))?;
    println!(
        "adoptions: {} events over {} topics ({} malformed lines skipped)",
        sequences.iter().map(|s| s.len()).sum::<usize>(),
        sequences.len(),
        skipped
    );
    if follows_src.is_some() {
        let (network, stats) = parse_follower_network(dirs.path(FOLLOWS), mode)?;
        println!(
            "follows: {} edges ({} skipped, {} self-loops dropped, {} duplicates)",
            network.edge_count(),
            stats.skipped,
            stats.self_loops,
            stats.duplicates
        );
    }
    if geo_src.is_some() {
        let (labels, stats) = parse_geo_labels(dirs.path(GEO), mode)?;
        println!(
            "geo: {} labeled users in {} classes ({} skipped, {} relabeled)",
            labels.len(),
            labels.classes().len(),
            stats.skipped,
            stats.duplicates
        );
    }
    println!(
        "split: {} train / {} test topics (train fraction {})",
        split.train.len(),
        split.test.len(),
        args.train_fraction
    );
    finish(dirs, manifest, "ingest", record)
}

/// Explicit flag wins; otherwise use the copy a previous stage left in the
/// run directory, if any.
fn optional_source(dirs: &RunDir, flag: &Option<PathBuf>, slot: &str) -> Option<PathBuf> {
    match flag {
        Some(p) => Some(p.clone()),
        None => {
            let fallback = dirs.path(slot);
            fallback.exists().then_some(fallback)
        }
    }
}

fn copy_into_run(src: &Path, dst: &Path) -> Result<()> {
    let same = match (fs::canonicalize(src), fs::canonicalize(dst)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if !same {
        fs::copy(src, dst)
            .with_context(|| format!("cannot copy {} into {}", src.display(), dst.display()))?;
    }
    Ok(())
}

fn cmd_corpus(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: CorpusArgs,
) -> Result<()> {
    manifest.require("ingest")?;
    let cfg = CorpusConfig {
        tau_seconds: args.tau,
        gamma: args.gamma,
        rng_seed: args.seed,
    };
    cfg.validate()?;
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs: digest_inputs(dirs, &[ADOPTIONS, SPLIT])?,
        outputs: vec![WALKS.into()],
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "corpus", &record) {
        return Ok(());
    }

    let split = TopicSplit::load(dirs.path(SPLIT))?;
    let sequences: Vec<AdoptionSequence> = load_sequences(dirs)?
        .into_iter()
        .filter(|s| split.is_train(&s.topic_id))
        .collect();
    let corpus = generate_corpus(&sequences, &cfg)?;
    corpus.save(dirs.path(WALKS))?;
    println!(
        "corpus: {} walks, {} tokens from {} train topics (tau {}s, gamma {})",
        corpus.len(),
        corpus.token_count(),
        sequences.len(),
        args.tau,
        args.gamma
    );
    finish(dirs, manifest, "corpus", record)
}

fn cmd_train(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: TrainArgs,
) -> Result<()> {
    manifest.require("corpus")?;
    let mode = match args.mode {
        ModeArg::Hs => TrainMode::HierarchicalSoftmax,
        ModeArg::Ns => TrainMode::NegativeSampling {
            negatives: args.negatives,
        },
    };
    let cfg = TrainConfig {
        dim: args.dim,
        window: args.window,
        subsample_threshold: (args.subsample > 0.0).then_some(args.subsample),
        epochs: args.epochs,
        initial_learning_rate: args.learning_rate,
        min_count: args.min_count,
        mode,
        rng_seed: args.seed,
        worker_count: args.workers,
        dynamic_window: args.dynamic_window,
    };
    cfg.validate()?;
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs: digest_inputs(dirs, &[WALKS])?,
        outputs: vec![MODEL.into()],
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "train", &record) {
        return Ok(());
    }

    let corpus = WalkCorpus::load(dirs.path(WALKS))?;
    let model = train(&corpus, &cfg)?;
    model.save_text(dirs.path(MODEL))?;
    println!(
        "trained {} user vectors, dimension {} ({} epochs, {} workers)",
        model.vocab().len(),
        model.dim(),
        args.epochs,
        args.workers
    );
    finish(dirs, manifest, "train", record)
}

fn cmd_eval_adopters(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: EvalAdoptersArgs,
) -> Result<()> {
    manifest.require("ingest")?;
    manifest.require("train")?;
    let has_network = dirs.path(FOLLOWS).exists();
    let mut input_names = vec![MODEL, ADOPTIONS, SPLIT];
    if has_network {
        input_names.push(FOLLOWS);
    }
    let (table_path, table_name) = table_target(dirs, &args.out, ADOPTER_TABLE)?;
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs: digest_inputs(dirs, &input_names)?,
        outputs: vec![table_name, ADOPTER_HISTOGRAM.into()],
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "eval-adopters", &record) {
        return Ok(());
    }

    let embeddings = load_embeddings(dirs)?;
    let index = NeighborIndex::build(&embeddings)?;
    let split = TopicSplit::load(dirs.path(SPLIT))?;
    let (train_seqs, test_seqs): (Vec<_>, Vec<_>) = load_sequences(dirs)?
        .into_iter()
        .partition(|s| split.is_train(&s.topic_id));
    let network = load_network(dirs)?;

    let cfg = AdopterEvalConfig {
        n_values: args.n.clone(),
        k: args.k,
        scorer: match args.scorer {
            ScorerArg::Min => Scorer::Min,
            ScorerArg::Avg => Scorer::Average,
        },
        fanout: args.fanout,
        min_adopters: args.min_adopters,
        sample_size: none_if_zero(args.sample),
        rng_seed: args.seed,
    };
    let eval =
        evaluate_adopter_prediction(&test_seqs, &train_seqs, &index, network.as_ref(), &cfg)?;
    eval.write_table(&table_path)?;
    eval.write_histogram(dirs.path(ADOPTER_HISTOGRAM))?;

    println!("method\tn\tmean_precision@{}", args.k);
    for (method, n, mean) in &eval.means {
        println!("{method}\t{n}\t{mean:.4}");
    }
    println!(
        "evaluated {} topics ({} short (topic,n) pairs skipped, {} seedless, {} adopters unrankable)",
        eval.evaluated_topics, eval.skipped_short, eval.seedless_topics, eval.unrankable_adopters
    );
    if eval.evaluated_topics == 0 {
        println!(
            "note: no test topic reached --min-adopters {}",
            args.min_adopters
        );
    }
    println!("per-topic table: {}", table_path.display());
    finish(dirs, manifest, "eval-adopters", record)
}

fn cmd_eval_geo(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: EvalGeoArgs,
) -> Result<()> {
    manifest.require("ingest")?;
    manifest.require("train")?;
    if !dirs.path(GEO).exists() {
        bail!("no geo labels in the run directory; run `adoptvec ingest --geo <file>` first");
    }
    let has_network = dirs.path(FOLLOWS).exists();
    let mut input_names = vec![MODEL, GEO];
    if has_network {
        input_names.push(FOLLOWS);
    }
    let (table_path, table_name) = table_target(dirs, &args.out, GEO_TABLE)?;
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs: digest_inputs(dirs, &input_names)?,
        outputs: vec![table_name],
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "eval-geo", &record) {
        return Ok(());
    }

    let embeddings = load_embeddings(dirs)?;
    let (labels, _) = parse_geo_labels(dirs.path(GEO), ParseMode::Lenient)?;
    let network = load_network(dirs)?;
    let cfg = GeoEvalConfig {
        fractions: args.train_fraction.clone(),
        sample_size: none_if_zero(args.sample),
        rng_seed: args.seed,
        logistic: LogisticConfig {
            l2: args.l2,
            ..LogisticConfig::default()
        },
    };
    let rows = evaluate_geo(&embeddings, &labels, network.as_ref(), &cfg)?;
    adoptvec::geo::write_accuracy_table(&rows, &table_path)?;

    println!("method\ttrain_fraction\taccuracy");
    for row in &rows {
        println!(
            "{}\t{}\t{:.4}",
            row.method, row.train_fraction, row.accuracy
        );
    }
    println!("accuracy table: {}", table_path.display());
    finish(dirs, manifest, "eval-geo", record)
}

fn cmd_analyze(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: AnalyzeArgs,
) -> Result<()> {
    manifest.require("ingest")?;
    manifest.require("train")?;
    if !dirs.path(FOLLOWS).exists() {
        bail!("no follower network in the run directory; run `adoptvec ingest --follows <file>` first");
    }
    let (scatter_path, scatter_name) = table_target(dirs, &args.out, COADOPTION_TABLE)?;
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs: digest_inputs(dirs, &[MODEL, ADOPTIONS, FOLLOWS])?,
        outputs: vec![JACCARD_TABLE.into(), scatter_name],
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "analyze", &record) {
        return Ok(());
    }

    let embeddings = load_embeddings(dirs)?;
    let index = NeighborIndex::build(&embeddings)?;
    let network = load_network(dirs)?.expect("checked above");
    let map = AdoptionMap::new(&load_sequences(dirs)?);

    let jaccard = mean_jaccard_overlap(
        &network,
        &index,
        none_if_zero(args.jaccard_sample),
        args.seed,
    )?;
    fs::write(
        dirs.path(JACCARD_TABLE),
        format!(
            "mean_jaccard\tevaluated\texcluded\n{:.6}\t{}\t{}\n",
            jaccard.mean, jaccard.evaluated, jaccard.excluded
        ),
    )
    .with_context(|| format!("cannot write {}", dirs.path(JACCARD_TABLE).display()))?;
    println!(
        "follower vs k-NN Jaccard overlap: mean {:.4} over {} users ({} excluded)",
        jaccard.mean, jaccard.evaluated, jaccard.excluded
    );

    let comparison = compare_neighborhood_coadoption(
        &map,
        &network,
        &index,
        none_if_zero(args.coadoption_sample),
        args.seed,
    )?;
    comparison.write_scatter(&scatter_path)?;
    println!(
        "co-adoption likelihood: network mean {:.4}, vector-space mean {:.4} over {} users ({} excluded)",
        comparison.network_mean,
        comparison.vector_mean,
        comparison.pairs.len(),
        comparison.excluded
    );
    println!("scatter: {}", scatter_path.display());
    finish(dirs, manifest, "analyze", record)
}

fn cmd_export_projection(
    dirs: &RunDir,
    manifest: &mut RunManifest,
    force: bool,
    args: ExportProjectionArgs,
) -> Result<()> {
    manifest.require("train")?;
    if args.topic.is_some() {
        manifest.require("ingest")?;
    }
    let has_geo = dirs.path(GEO).exists();
    let mut input_names = vec![MODEL];
    if has_geo {
        input_names.push(GEO);
    }
    if args.topic.is_some() {
        input_names.push(ADOPTIONS);
    }
    let (coords_path, coords_name) = table_target(dirs, &args.out, PROJECTION_TABLE)?;
    let record = StageRecord {
        completed: true,
        config: serde_json::to_value(&args)?,
        inputs: digest_inputs(dirs, &input_names)?,
        outputs: vec![coords_name, PROJECTION_VECTORS.into()],
        seed: args.seed,
    };
    if up_to_date(dirs, manifest, force, "export-projection", &record) {
        return Ok(());
    }

    let embeddings = load_embeddings(dirs)?;
    let projection = project_sample(&embeddings, none_if_zero(args.sample), args.seed)?;
    let geo = if has_geo {
        Some(parse_geo_labels(dirs.path(GEO), ParseMode::Lenient)?.0)
    } else {
        None
    };
    let adopters: Option<BTreeSet<String>> = match &args.topic {
        Some(topic) => {
            let set = topic_adopters(dirs, topic)?;
            if set.is_empty() {
                bail!("topic {topic:?} does not appear in the adoption log");
            }
            Some(set)
        }
        None => None,
    };
    write_projection(
        &projection,
        &embeddings,
        geo.as_ref(),
        adopters.as_ref(),
        &coords_path,
        dirs.path(PROJECTION_VECTORS),
    )?;
    println!(
        "projected {} users; component variances {:.4} and {:.4}",
        projection.users.len(),
        projection.pca.variances[0],
        projection.pca.variances[1]
    );
    println!("coordinates: {}", coords_path.display());
    finish(dirs, manifest, "export-projection", record)
}

fn load_sequences(dirs: &RunDir) -> Result<Vec<AdoptionSequence>> {
    // Ingest already validated the copy; lenient tolerates lines it skipped.
    let (events, _) = parse_adoption_log(dirs.path(ADOPTIONS), ParseMode::Lenient)?;
    Ok(group_into_sequences(events))
}

fn load_network(dirs: &RunDir) -> Result<Option<FollowerNetwork>> {
    let path = dirs.path(FOLLOWS);
    if !path.exists() {
        return Ok(None);
    }
    let (network, _) = parse_follower_network(path, ParseMode::Lenient)?;
    Ok(Some(network))
}

fn load_embeddings(dirs: &RunDir) -> Result<NormalizedEmbeddings> {
    let raw = RawEmbeddings::load_text(dirs.path(MODEL))?;
    let (embeddings, dropped) = NormalizedEmbeddings::from_raw(&raw);
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} zero vectors during normalization");
    }
    Ok(embeddings)
}

fn topic_adopters(dirs: &RunDir, topic: &str) -> Result<BTreeSet<String>> {
    Ok(load_sequences(dirs)?
        .iter()
        .filter(|s| s.topic_id == topic)
        .flat_map(|s| s.first_adopters().into_iter().map(str::to_string))
        .collect())
}
