use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{parse_bool, parse_list, parse_value, KeyValues};
use super::derive_seed;
use crate::embed::{build_sentences, fill_coldstart, train_embeddings, Mode, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{EdgeList, Graph};
use crate::labelprop::{PropagationConfig, Strategy, AGE_BUCKETS};
use crate::labels::{class_indices, read_labels, seed_state, LabelFormat};
use crate::lpfeatures::{lp_features, make_partitions, DEFAULT_SPLITS};
use crate::model::{
    evaluate, join_features, predict, split, train_logistic, train_mlp, FeatureBlock, SplitSpec, TrainParams,
    DEFAULT_HIDDEN,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Task {
    /// Binary labels, 0 or 1.
    Gender,
    /// Age bucket index 0..7.
    Age,
}

impl Task {
    pub fn classes(self) -> usize {
        match self {
            Task::Gender => 2,
            Task::Age => AGE_BUCKETS,
        }
    }

    pub fn label_format(self) -> LabelFormat {
        match self {
            Task::Gender => LabelFormat::Binary,
            Task::Age => LabelFormat::Class { classes: AGE_BUCKETS },
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Logistic,
    Mlp,
}

/// Settings for one pipeline run.
///
/// Recognized keys: `edges`, `labels`, `features.<name>`, `regimes`
/// (comma-separated, each a `+`-joined list of block names or `all`),
/// `task`, `model`, `mlp.hidden`, `split`, `train_frac`, `rng_seed`,
/// `min_degree`, `workers`, `out`, `lp.strategy`, `lp.param`, `lp.iters`,
/// `lp.splits`, `emb.mode`, `emb.dim`, `emb.window`, `emb.negatives`,
/// `emb.lr`, `emb.epochs`, `emb.min_count`, `emb.bidirectional`,
/// `train.lr`, `train.epochs`, `train.minibatch`, `train.l2`,
/// `train.balance`, `train.standardize`.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub edges: PathBuf,
    pub labels: PathBuf,
    /// Feature files by block name, in key order.
    pub features: Vec<(String, PathBuf)>,
    pub regimes: Vec<String>,
    pub task: Task,
    pub model: ModelKind,
    pub hidden: Vec<usize>,
    /// `None` selects the hash split.
    pub random_split: bool,
    pub train_fraction: Option<f64>,
    pub rng_seed: u64,
    pub min_degree: usize,
    pub lp: PropagationConfig,
    pub lp_splits: usize,
    pub emb: TrainConfig,
    pub emb_bidirectional: bool,
    pub train: TrainParams,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    /// Reads a config file; relative paths are taken from its directory.
    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let mut kv = KeyValues::load(path)?;
        for (k, v) in overrides {
            kv.set(k, v);
        }
        Self::from_key_values(&kv, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_key_values(kv: &KeyValues, base: &Path) -> Result<Self> {
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let mut edges = None;
        let mut labels = None;
        let mut cfg = PipelineConfig {
            edges: PathBuf::new(),
            labels: PathBuf::new(),
            features: Vec::new(),
            regimes: vec!["all".into()],
            task: Task::Gender,
            model: ModelKind::Logistic,
            hidden: DEFAULT_HIDDEN.to_vec(),
            random_split: false,
            train_fraction: None,
            rng_seed: 1,
            min_degree: 0,
            lp: PropagationConfig::default(),
            lp_splits: DEFAULT_SPLITS,
            emb: TrainConfig::skip_gram(),
            emb_bidirectional: false,
            train: TrainParams::default(),
            out: None,
        };
        let mut strategy = "alpha".to_owned();
        let mut param = None;
        let mut mode = None;

        for (key, value) in kv.iter() {
            match key {
                "edges" => edges = Some(resolve(value)),
                "labels" => labels = Some(resolve(value)),
                "regimes" => cfg.regimes = parse_list(key, value)?,
                "task" => {
                    cfg.task = match value {
                        "gender" => Task::Gender,
                        "age" => Task::Age,
                        _ => return Err(Error::config(format!("task must be gender or age, got {value:?}"))),
                    }
                }
                "model" => {
                    cfg.model = match value {
                        "lr" => ModelKind::Logistic,
                        "mlp" => ModelKind::Mlp,
                        _ => return Err(Error::config(format!("model must be lr or mlp, got {value:?}"))),
                    }
                }
                "mlp.hidden" => cfg.hidden = parse_list(key, value)?,
                "split" => {
                    cfg.random_split = match value {
                        "hash" => false,
                        "random" => true,
                        _ => return Err(Error::config(format!("split must be hash or random, got {value:?}"))),
                    }
                }
                "train_frac" => cfg.train_fraction = Some(parse_value(key, value)?),
                "rng_seed" => cfg.rng_seed = parse_value(key, value)?,
                "min_degree" => cfg.min_degree = parse_value(key, value)?,
                "workers" => cfg.lp.workers = parse_value(key, value)?,
                "out" => cfg.out = Some(resolve(value)),
                "lp.strategy" => strategy = value.to_owned(),
                "lp.param" => param = Some(parse_value::<f64>(key, value)?),
                "lp.iters" => cfg.lp.iterations = parse_value(key, value)?,
                "lp.splits" => cfg.lp_splits = parse_value(key, value)?,
                "emb.mode" => mode = Some(value.to_owned()),
                "emb.dim" => cfg.emb.dim = parse_value(key, value)?,
                "emb.window" => cfg.emb.window = parse_value(key, value)?,
                "emb.negatives" => cfg.emb.negatives = parse_value(key, value)?,
                "emb.lr" => cfg.emb.learning_rate = parse_value(key, value)?,
                "emb.epochs" => cfg.emb.epochs = parse_value(key, value)?,
                "emb.min_count" => cfg.emb.min_count = parse_value(key, value)?,
                "emb.bidirectional" => cfg.emb_bidirectional = parse_bool(key, value)?,
                "train.lr" => cfg.train.learning_rate = parse_value(key, value)?,
                "train.epochs" => cfg.train.epochs = parse_value(key, value)?,
                "train.minibatch" => cfg.train.minibatch = parse_value(key, value)?,
                "train.l2" => cfg.train.l2 = parse_value(key, value)?,
                "train.balance" => cfg.train.balance_classes = parse_bool(key, value)?,
                "train.standardize" => cfg.train.standardize = parse_bool(key, value)?,
                _ => match key.strip_prefix("features.") {
                    Some(name) if !name.is_empty() && !matches!(name, "lp" | "emb" | "all") => {
                        cfg.features.push((name.to_owned(), resolve(value)))
                    }
                    _ => return Err(Error::config(format!("unknown key {key:?}"))),
                },
            }
        }

        cfg.edges = edges.ok_or_else(|| Error::config("missing key `edges`"))?;
        cfg.labels = labels.ok_or_else(|| Error::config("missing key `labels`"))?;
        cfg.lp.strategy = match (strategy.as_str(), param) {
            ("alpha", p) => Strategy::Alpha(p.unwrap_or(0.3)),
            ("beta", p) => Strategy::Beta(p.unwrap_or(0.8)),
            ("gamma", p) => Strategy::Gamma(p.unwrap_or(0.9)),
            (s, _) => return Err(Error::config(format!("unknown lp.strategy {s:?}"))),
        };
        if let Some(m) = mode {
            let keep = cfg.emb.clone();
            cfg.emb = match m.as_str() {
                "skipgram" => TrainConfig { mode: Mode::SkipGram, ..keep },
                "cbow" => TrainConfig { mode: Mode::Cbow, ..keep },
                _ => return Err(Error::config(format!("emb.mode must be skipgram or cbow, got {m:?}"))),
            };
        }
        cfg.lp.validate()?;
        cfg.emb.validate()?;
        if cfg.regimes.is_empty() {
            return Err(Error::config("no regimes requested"));
        }
        Ok(cfg)
    }

    fn split_spec(&self) -> SplitSpec {
        match (self.random_split, self.train_fraction) {
            (false, None) => SplitSpec::hash(),
            (false, Some(f)) => SplitSpec::Hash { train_fraction: f },
            (true, f) => SplitSpec::Random {
                train_fraction: f.unwrap_or(SplitSpec::random(0).train_fraction()),
                rng_seed: derive_seed(self.rng_seed, "split"),
            },
        }
    }

    /// Block names of each regime, with `all` expanded.
    fn regime_blocks(&self) -> Result<Vec<Vec<String>>> {
        let mut all: Vec<String> = self.features.iter().map(|(n, _)| n.clone()).collect();
        all.extend(["lp".to_owned(), "emb".to_owned()]);
        self.regimes
            .iter()
            .map(|r| {
                if r == "all" {
                    return Ok(all.clone());
                }
                let parts: Vec<String> = r.split('+').map(|s| s.trim().to_owned()).collect();
                for p in &parts {
                    if !all.contains(p) {
                        return Err(Error::config(format!("regime {r:?} names unknown block {p:?}")));
                    }
                }
                Ok(parts)
            })
            .collect()
    }
}

/// Metrics of one feature regime on the held-out rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeRecord {
    pub regime: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub width: usize,
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub cross_entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub records: Vec<RegimeRecord>,
}

impl PipelineReport {
    /// One JSON object per line, in regime order.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn get(&self, regime: &str) -> Option<&RegimeRecord> {
        self.records.iter().find(|r| r.regime == regime)
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<20} {:>7} {:>7} {:>6} {:>8} {:>9} {:>9}\n",
            "regime", "train", "test", "width", "auc", "accuracy", "xent"
        );
        for r in &self.records {
            let auc = r.auc.map_or("-".to_owned(), |a| format!("{a:.4}"));
            let _ = writeln!(
                out,
                "{:<20} {:>7} {:>7} {:>6} {:>8} {:>9.4} {:>9.4}",
                r.regime, r.train_rows, r.test_rows, r.width, auc, r.accuracy, r.cross_entropy
            );
        }
        out
    }
}

/// Ingest, build every requested feature block, join, train and evaluate
/// each regime. All regimes are scored on the same rows: labeled nodes
/// present in every block any regime uses. Propagation is seeded with
/// training labels only.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let regimes = cfg.regime_blocks()?;
    let used: HashSet<&str> = regimes.iter().flatten().map(String::as_str).collect();

    let mut inputs = vec![&cfg.edges, &cfg.labels];
    inputs.extend(cfg.features.iter().filter(|(n, _)| used.contains(n.as_str())).map(|(_, p)| p));
    let missing: Vec<PathBuf> = inputs.into_iter().filter(|p| !p.exists()).cloned().collect();
    if !missing.is_empty() {
        return Err(Error::MissingInputs(missing));
    }

    let list = EdgeList::read(&cfg.edges)?;
    let g = Graph::from_edge_list(&list, cfg.min_degree, true)?;
    let entries = read_labels(&cfg.labels, cfg.task.label_format())?;
    let classes = class_indices(&entries, cfg.task.label_format())?;
    let names: Vec<String> = entries.iter().map(|e| e.name.clone()).collect();
    let truth: HashMap<&str, usize> = names.iter().map(String::as_str).zip(classes.iter().copied()).collect();
    if truth.len() != names.len() {
        return Err(Error::validation("label file lists a node twice"));
    }

    let (train_idx, _) = split(&names, cfg.split_spec())?;
    let train_names: HashSet<&str> = train_idx.iter().map(|&i| names[i].as_str()).collect();

    let mut blocks: HashMap<String, FeatureBlock> = HashMap::new();
    for (name, path) in &cfg.features {
        if used.contains(name.as_str()) {
            let mut block = FeatureBlock::read_csv(path)?;
            block.name = name.clone();
            blocks.insert(name.clone(), block);
        }
    }
    if used.contains("lp") {
        let train_entries: Vec<_> = entries.iter().filter(|e| train_names.contains(e.name.as_str())).cloned().collect();
        let channels = if cfg.task == Task::Gender { 1 } else { AGE_BUCKETS };
        let seeds = seed_state(&g, &train_entries, channels)?;
        let labeled: Vec<_> = seeds.seed_nodes().collect();
        let plan = make_partitions(&labeled, cfg.lp_splits, derive_seed(cfg.rng_seed, "lp-partitions"))?;
        let lp = lp_features(&g, &seeds, &plan, &cfg.lp)?;
        let mut block = FeatureBlock::new("lp", lp.column_names());
        for v in g.node_ids() {
            block.push_row(g.name(v), &lp.row(v));
        }
        blocks.insert("lp".into(), block);
    }
    if used.contains("emb") {
        let corpus = build_sentences(&list, derive_seed(cfg.rng_seed, "sentences"), cfg.emb_bidirectional);
        let emb_cfg = TrainConfig {
            rng_seed: derive_seed(cfg.rng_seed, "embed"),
            ..cfg.emb.clone()
        };
        let table = train_embeddings(&corpus, &emb_cfg)?;
        let mut block = FeatureBlock::new("emb", (0..table.dim()).map(|i| format!("e{i}")).collect());
        for (v, row) in g.node_ids().zip(fill_coldstart(&g, &table)) {
            if let Some(row) = row {
                block.push_row(g.name(v), &row);
            }
        }
        blocks.insert("emb".into(), block);
    }

    let mut used_sorted: Vec<&str> = used.iter().copied().collect();
    used_sorted.sort_unstable();
    let every: Vec<FeatureBlock> = used_sorted.iter().map(|n| blocks[*n].clone()).collect();
    let (common, _) = join_features(&every, Some(&names))?;
    let rows: Vec<String> = common.nodes().to_vec();

    let mut records = Vec::with_capacity(regimes.len());
    for (label, parts) in cfg.regimes.iter().zip(&regimes) {
        let chosen: Vec<FeatureBlock> = parts.iter().map(|n| blocks[n].clone()).collect();
        let (x, _) = join_features(&chosen, Some(&rows))?;
        let y: Vec<usize> = x.nodes().iter().map(|n| truth[n.as_str()]).collect();
        let (train, test): (Vec<usize>, Vec<usize>) =
            (0..x.rows()).partition(|&i| train_names.contains(x.nodes()[i].as_str()));
        if train.is_empty() || test.is_empty() {
            return Err(Error::validation(format!("regime {label}: empty train or test set")));
        }
        let x_train = x.select_rows(&train);
        let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let hyper = TrainParams {
            rng_seed: derive_seed(cfg.rng_seed, "model"),
            ..cfg.train.clone()
        };
        let fitted = match cfg.model {
            ModelKind::Logistic => train_logistic(&x_train, &y_train, cfg.task.classes(), &hyper)?,
            ModelKind::Mlp => train_mlp(&x_train, &y_train, cfg.task.classes(), &cfg.hidden, &hyper)?,
        };
        let probs = predict(&fitted.params, &x.select_rows(&test))?;
        let y_test: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        let m = evaluate(&probs, &y_test)?;
        records.push(RegimeRecord {
            regime: label.clone(),
            train_rows: train.len(),
            test_rows: test.len(),
            width: x.width(),
            auc: m.auc,
            accuracy: m.accuracy,
            cross_entropy: m.cross_entropy,
        });
    }

    let report = PipelineReport { records };
    if let Some(out) = &cfg.out {
        fs::write(out, report.to_jsonl()).map_err(|e| Error::io(out, e))?;
    }
    Ok(report)
}
