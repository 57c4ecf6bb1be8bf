//! `demograph`: command-line access to every pipeline stage.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! for failures while running.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use demograph_core::embed::{
    build_sentences, fill_coldstart, train_embeddings, EmbeddingTable, Mode, SentenceCorpus, TrainConfig,
};
use demograph_core::experiment::{
    derive_seed, run_pipeline, run_sensitivity, ExperimentGrid, PipelineConfig, SensitivityInput,
};
use demograph_core::graph::{load_edge_list, EdgeList, Graph, Interner};
use demograph_core::labelprop::{propagate, PropagationConfig, Strategy, AGE_BUCKETS};
use demograph_core::labels::{class_indices, read_labels, seed_state, write_label_state, LabelFormat};
use demograph_core::lpfeatures::{lp_features, make_partitions};
use demograph_core::model::{
    evaluate, join_features, predict, split, train_logistic, train_mlp, FeatureBlock, FeatureMatrix, Metrics,
    ModelParams, SplitSpec, TrainParams,
};
use demograph_core::synth::{generate, PlantedGraphSpec};
use demograph_core::{Error, Result};

#[derive(Parser)]
#[command(name = "demograph", version, about = "Demographic inference on follow graphs", propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an edge list, filter and symmetrize it, and export the result.
    Ingest(IngestArgs),
    /// Run label propagation from seed labels.
    Propagate(PropagateArgs),
    /// Build leave-partition-out propagation features.
    LpFeatures(LpFeaturesArgs),
    /// Write one neighbor sentence per node.
    Sentences(SentencesArgs),
    /// Train node embeddings on a sentence corpus.
    Embed(EmbedArgs),
    /// Fill missing embeddings with neighbor averages.
    Coldstart(ColdstartArgs),
    /// Generate a planted-partition dataset.
    Synth(SynthArgs),
    /// Train a classifier on joined feature files and report test metrics.
    Train(TrainArgs),
    /// Score a saved model.
    Eval(EvalArgs),
    /// Run the configured end-to-end pipeline over feature regimes.
    Pipeline(PipelineArgs),
    /// Score a grid of propagation settings on held-out labels.
    Sensitivity(SensitivityArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list, `<src>\t<dst>` per line.
    #[arg(long)]
    graph: PathBuf,
    /// Drop nodes following fewer than this many others.
    #[arg(long, default_value_t = 0)]
    min_degree: usize,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph> {
        load_edge_list(&self.graph, self.min_degree, true)
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long, default_value_t = 0)]
    min_degree: usize,
    /// Keep only reciprocated follows instead of symmetrizing.
    #[arg(long)]
    mutual_only: bool,
    /// Cleaned undirected edge list.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `<index>\t<name>` mapping.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum StrategyKind {
    Alpha,
    Beta,
    Gamma,
}

#[derive(Args)]
struct PropagationArgs {
    #[arg(long, value_enum, default_value = "alpha")]
    strategy: StrategyKind,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Supersteps K.
    #[arg(long, default_value_t = 3)]
    iters: usize,
    /// Worker threads; 0 for all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl PropagationArgs {
    fn config(&self) -> PropagationConfig {
        let strategy = match self.strategy {
            StrategyKind::Alpha => Strategy::Alpha(self.alpha),
            StrategyKind::Beta => Strategy::Beta(self.beta),
            StrategyKind::Gamma => Strategy::Gamma(self.gamma),
        };
        PropagationConfig {
            strategy,
            iterations: self.iters,
            workers: self.workers,
        }
    }
}

#[derive(Args)]
struct SeedArgs {
    /// Seed labels, `<name>\t<value>` per line.
    #[arg(long)]
    seeds: PathBuf,
    /// 1 for a binary label, 7 for age buckets.
    #[arg(long, default_value_t = 1)]
    classes: usize,
    /// Age seeds are given in years rather than bucket indices.
    #[arg(long)]
    age_years: bool,
}

impl SeedArgs {
    fn format(&self) -> Result<LabelFormat> {
        match (self.classes, self.age_years) {
            (1, false) => Ok(LabelFormat::Binary),
            (AGE_BUCKETS, false) => Ok(LabelFormat::Class { classes: AGE_BUCKETS }),
            (AGE_BUCKETS, true) => Ok(LabelFormat::Age),
            _ => Err(Error::Config(format!(
                "--classes must be 1 or {AGE_BUCKETS}; --age-years needs {AGE_BUCKETS}"
            ))),
        }
    }
}

#[derive(Args)]
struct PropagateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[command(flatten)]
    lp: PropagationArgs,
    /// Write inactive nodes with this token instead of omitting them.
    #[arg(long)]
    inactive: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LpFeaturesArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[command(flatten)]
    lp: PropagationArgs,
    /// Number of seed partitions N.
    #[arg(long, default_value_t = 3)]
    splits: usize,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SentencesArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Include followers as well as followed nodes.
    #[arg(long)]
    bidirectional: bool,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Skipgram,
    Cbow,
}

#[derive(Args)]
struct EmbedArgs {
    /// Sentence corpus, one space-separated sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "skipgram")]
    mode: ModeArg,
    #[arg(long, default_value_t = 50)]
    dim: usize,
    /// Defaults to 5 for skip-gram and 6 for CBOW.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    /// Frequent-token subsampling threshold.
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ColdstartArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Embedding table in word2vec text format.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 2000)]
    per_class: usize,
    #[arg(long, default_value_t = 0.01)]
    p: f64,
    #[arg(long, default_value_t = 0.001)]
    q: f64,
    #[arg(long, default_value_t = 0.2)]
    reveal: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
    /// Allow q > p.
    #[arg(long)]
    allow_anti_homophily: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Gender,
    Age,
}

impl TaskArg {
    fn format(self) -> LabelFormat {
        match self {
            TaskArg::Gender => LabelFormat::Binary,
            TaskArg::Age => LabelFormat::Class { classes: AGE_BUCKETS },
        }
    }

    fn classes(self) -> usize {
        match self {
            TaskArg::Gender => 2,
            TaskArg::Age => AGE_BUCKETS,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ModelArg {
    Lr,
    Mlp,
}

#[derive(Copy, Clone, ValueEnum)]
enum SplitArg {
    Hash,
    Random,
}

#[derive(Args)]
struct DataArgs {
    /// Comma-separated feature CSV files, joined on `node`.
    #[arg(long, value_delimiter = ',', required = true)]
    features: Vec<PathBuf>,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, value_enum, default_value = "gender")]
    task: TaskArg,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long, value_enum, default_value = "hash")]
    split: SplitArg,
    /// Defaults to 0.75 for hash and 0.70 for random splits.
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
}

impl SplitArgs {
    fn spec(&self) -> SplitSpec {
        let seed = derive_seed(self.rng_seed, "split");
        match (self.split, self.train_frac) {
            (SplitArg::Hash, None) => SplitSpec::hash(),
            (SplitArg::Hash, Some(f)) => SplitSpec::Hash { train_fraction: f },
            (SplitArg::Random, None) => SplitSpec::random(seed),
            (SplitArg::Random, Some(f)) => SplitSpec::Random {
                train_fraction: f,
                rng_seed: seed,
            },
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long, value_enum, default_value = "mlp")]
    model: ModelArg,
    #[arg(long, value_delimiter = ',', default_value = "256,256,256")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    epochs: usize,
    #[arg(long, default_value_t = 3000)]
    minibatch: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// Down-sample classes to equal size.
    #[arg(long)]
    balance: bool,
    /// Save the fitted model as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Write the metrics record here as well as to stdout.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Model JSON written by `train --model-out`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Score only the test side of this split; all labeled rows otherwise.
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Binary ground truth for scoring.
    #[arg(long)]
    truth: PathBuf,
    /// Revealed seeds; required unless --reveal is given.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Draw a fresh reveal of this fraction of labeled nodes per repetition.
    #[arg(long)]
    reveal: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "alpha")]
    strategies: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
    params: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    iters: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
    /// Concurrent grid cells; 0 for all cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Long-format CSV output.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Propagate(a) => propagate_cmd(a),
        Command::LpFeatures(a) => lp_features_cmd(a),
        Command::Sentences(a) => {
            let list = EdgeList::read(&a.graph)?;
            let corpus = build_sentences(&list, a.rng_seed, a.bidirectional);
            corpus.write(&a.out)?;
            println!("{} sentences, {} tokens", corpus.sentences.len(), corpus.token_count());
            Ok(())
        }
        Command::Embed(a) => embed_cmd(a),
        Command::Coldstart(a) => coldstart_cmd(a),
        Command::Synth(a) => {
            let spec = PlantedGraphSpec {
                per_class: a.per_class,
                classes: a.classes,
                p: a.p,
                q: a.q,
                reveal: a.reveal,
                noise: a.noise,
                rng_seed: a.rng_seed,
                allow_anti_homophily: a.allow_anti_homophily,
            };
            let data = generate(&spec)?;
            data.write(&a.out_dir)?;
            println!(
                "{} nodes, {} edges, {} seeds",
                data.node_count(),
                data.edges.len(),
                data.seeds.len()
            );
            Ok(())
        }
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Pipeline(a) => {
            let overrides = a
                .overrides
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                        .ok_or_else(|| Error::Config(format!("--set expects key=value, got {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let cfg = PipelineConfig::load(&a.config, &overrides)?;
            let report = run_pipeline(&cfg)?;
            print!("{}", report.to_jsonl());
            print!("{}", report.table());
            Ok(())
        }
        Command::Sensitivity(a) => sensitivity_cmd(a),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let list = EdgeList::read(&a.edges)?;
    let g = Graph::from_edge_list(&list, a.min_degree, !a.mutual_only)?;
    if let Some(out) = &a.out {
        g.write_edge_list(out)?;
    }
    if let Some(mapping) = &a.mapping {
        g.write_node_mapping(mapping)?;
    }
    println!("{} nodes, {} edges", g.node_count(), g.edge_count());
    Ok(())
}

fn propagate_cmd(a: PropagateArgs) -> Result<()> {
    let g = a.graph.load()?;
    let entries = read_labels(&a.seeds.seeds, a.seeds.format()?)?;
    let seeds = seed_state(&g, &entries, a.seeds.classes)?;
    let out = propagate(&g, &seeds, &a.lp.config())?;
    write_label_state(&a.out, &g, &out.state, a.inactive.as_deref())?;
    println!(
        "{} nodes, {} seeds, coverage {:.4}",
        g.node_count(),
        seeds.seed_count(),
        out.coverage
    );
    Ok(())
}

fn lp_features_cmd(a: LpFeaturesArgs) -> Result<()> {
    let g = a.graph.load()?;
    let entries = read_labels(&a.seeds.seeds, a.seeds.format()?)?;
    let seeds = seed_state(&g, &entries, a.seeds.classes)?;
    let labeled: Vec<_> = seeds.seed_nodes().collect();
    let plan = make_partitions(&labeled, a.splits, a.rng_seed)?;
    let block = lp_features(&g, &seeds, &plan, &a.lp.config())?;
    block.write_csv(&a.out, &g)?;
    println!("{} nodes, {} columns", g.node_count(), block.width());
    Ok(())
}

fn embed_cmd(a: EmbedArgs) -> Result<()> {
    let corpus = SentenceCorpus::read(&a.corpus)?;
    let base = match a.mode {
        ModeArg::Skipgram => TrainConfig::skip_gram(),
        ModeArg::Cbow => TrainConfig::cbow(),
    };
    let cfg = TrainConfig {
        mode: match a.mode {
            ModeArg::Skipgram => Mode::SkipGram,
            ModeArg::Cbow => Mode::Cbow,
        },
        dim: a.dim,
        window: a.window.unwrap_or(base.window),
        negatives: a.negatives,
        learning_rate: a.lr,
        epochs: a.epochs,
        min_count: a.min_count,
        subsample: a.subsample,
        rng_seed: a.rng_seed,
    };
    let table = train_embeddings(&corpus, &cfg)?;
    table.write_text(&a.out)?;
    println!("{} vectors of dimension {}", table.len(), table.dim());
    Ok(())
}

fn coldstart_cmd(a: ColdstartArgs) -> Result<()> {
    let g = a.graph.load()?;
    let table = EmbeddingTable::read_text(&a.embeddings)?;
    let mut tokens = Interner::new();
    let mut vectors = Vec::new();
    let mut filled = 0usize;
    for (v, row) in g.node_ids().zip(fill_coldstart(&g, &table)) {
        if let Some(row) = row {
            if table.get(g.name(v)).is_none() {
                filled += 1;
            }
            tokens.intern(g.name(v));
            vectors.extend(row);
        }
    }
    let n = tokens.len();
    EmbeddingTable::new(table.dim(), tokens, vectors, vec![0; n], 0).write_text(&a.out)?;
    println!("{n} vectors, {filled} filled from neighbors");
    Ok(())
}

/// Joined features restricted to labeled rows, with their classes.
fn labeled_matrix(data: &DataArgs) -> Result<(FeatureMatrix, Vec<usize>)> {
    let blocks = data
        .features
        .iter()
        .map(FeatureBlock::read_csv)
        .collect::<Result<Vec<_>>>()?;
    let entries = read_labels(&data.labels, data.task.format())?;
    let classes = class_indices(&entries, data.task.format())?;
    let names: Vec<String> = entries.iter().map(|e| e.name.clone()).collect();
    let truth: HashMap<&str, usize> = names.iter().map(String::as_str).zip(classes).collect();
    let (x, report) = join_features(&blocks, Some(&names))?;
    for (block, dropped) in report.dropped {
        if dropped > 0 {
            eprintln!("{block}: {dropped} rows without a label or missing from another block");
        }
    }
    let y = x.nodes().iter().map(|n| truth[n.as_str()]).collect();
    Ok((x, y))
}

fn report(metrics: &Metrics, rows: usize, out: Option<&Path>) -> Result<()> {
    let json = metrics.to_json();
    println!("{json}");
    let auc = metrics.auc.map_or("-".to_owned(), |a| format!("{a:.4}"));
    println!("{:>8} {:>8} {:>9} {:>9}", "rows", "auc", "accuracy", "xent");
    println!(
        "{:>8} {:>8} {:>9.4} {:>9.4}",
        rows, auc, metrics.accuracy, metrics.cross_entropy
    );
    if let Some(path) = out {
        fs::write(path, json + "\n").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let (x, y) = labeled_matrix(&a.data)?;
    let (train, test) = split(x.nodes(), a.split.spec())?;
    if test.is_empty() {
        return Err(Error::Validation("test split is empty".into()));
    }
    let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let hyper = TrainParams {
        learning_rate: a.lr,
        epochs: a.epochs,
        minibatch: a.minibatch,
        l2: a.l2,
        rng_seed: derive_seed(a.split.rng_seed, "model"),
        balance_classes: a.balance,
        ..TrainParams::default()
    };
    let classes = a.data.task.classes();
    let x_train = x.select_rows(&train);
    let fitted = match a.model {
        ModelArg::Lr => train_logistic(&x_train, &y_train, classes, &hyper)?,
        ModelArg::Mlp => train_mlp(&x_train, &y_train, classes, &a.hidden, &hyper)?,
    };
    for (epoch, loss) in fitted.epoch_losses.iter().enumerate() {
        eprintln!("epoch {} loss {loss:.6}", epoch + 1);
    }
    if let Some(path) = &a.model_out {
        fitted.params.save(path)?;
    }
    let probs = predict(&fitted.params, &x.select_rows(&test))?;
    let y_test: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    report(&evaluate(&probs, &y_test)?, test.len(), a.metrics_out.as_deref())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let params = ModelParams::load(&a.model)?;
    let (x, y) = labeled_matrix(&a.data)?;
    let rows: Vec<usize> = match a.split {
        None => (0..x.rows()).collect(),
        Some(mode) => {
            let split_args = SplitArgs {
                split: mode,
                train_frac: a.train_frac,
                rng_seed: a.rng_seed,
            };
            split(x.nodes(), split_args.spec())?.1
        }
    };
    let probs = predict(&params, &x.select_rows(&rows))?;
    let truth: Vec<usize> = rows.iter().map(|&i| y[i]).collect();
    report(&evaluate(&probs, &truth)?, rows.len(), a.metrics_out.as_deref())
}

fn sensitivity_cmd(a: SensitivityArgs) -> Result<()> {
    let g = a.graph.load()?;
    let truth = read_labels(&a.truth, LabelFormat::Binary)?;
    let seeds = match (&a.seeds, a.reveal) {
        (Some(path), _) => read_labels(path, LabelFormat::Binary)?,
        (None, Some(_)) => Vec::new(),
        (None, None) => return Err(Error::Config("give --seeds or --reveal".into())),
    };
    let mut input = SensitivityInput::from_labels(g, &truth, &seeds)?;
    input.reveal = a.reveal;
    let kinds: Vec<&str> = a.strategies.iter().map(String::as_str).collect();
    let mut grid = ExperimentGrid::cross(&kinds, &a.params, &a.iters, a.reps, a.rng_seed)?;
    grid.workers = a.workers;
    let report = run_sensitivity(&input, &grid)?;
    report.write_csv(&a.out)?;
    print!("{}", report.pivot());
    Ok(())
}
