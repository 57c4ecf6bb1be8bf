use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::derive_seed;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::labelprop::{propagate, LabelState, PropagationConfig, Strategy};
use crate::labels::LabelEntry;
use crate::model::roc_auc;
use crate::synth::SynthData;

/// Grid of propagation settings to score. Each strategy carries its own
/// parameter; rows are produced for every (strategy, K, repetition).
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentGrid {
    pub strategies: Vec<Strategy>,
    pub iterations: Vec<usize>,
    pub repetitions: usize,
    pub rng_seed: u64,
    /// Concurrent cells; 0 uses the global pool.
    pub workers: usize,
}

impl ExperimentGrid {
    /// Cross product of strategy kinds (`alpha`, `beta`, `gamma`) and
    /// parameter values.
    pub fn cross(kinds: &[&str], params: &[f64], iterations: &[usize], repetitions: usize, rng_seed: u64) -> Result<Self> {
        let mut strategies = Vec::with_capacity(kinds.len() * params.len());
        for kind in kinds {
            for &x in params {
                strategies.push(match *kind {
                    "alpha" => Strategy::Alpha(x),
                    "beta" => Strategy::Beta(x),
                    "gamma" => Strategy::Gamma(x),
                    other => return Err(Error::config(format!("unknown strategy {other:?}"))),
                });
            }
        }
        Ok(ExperimentGrid {
            strategies,
            iterations: iterations.to_vec(),
            repetitions,
            rng_seed,
            workers: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.iterations.is_empty() || self.repetitions == 0 {
            return Err(Error::config("experiment grid has an empty axis"));
        }
        for &strategy in &self.strategies {
            for &k in &self.iterations {
                PropagationConfig::new(strategy, k).validate()?;
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.strategies.len() * self.iterations.len() * self.repetitions
    }
}

/// A graph with binary ground truth and the revealed seeds.
#[derive(Clone, Debug)]
pub struct SensitivityInput {
    pub graph: Graph,
    /// Positive-class truth per graph node; `None` when unknown.
    pub truth: Vec<Option<bool>>,
    /// Revealed labels used when `reveal` is unset.
    pub seeds: Vec<(NodeId, f64)>,
    /// When set, every repetition draws a fresh uniform reveal of this
    /// fraction of the labeled nodes.
    pub reveal: Option<f64>,
}

impl SensitivityInput {
    /// Binary synthetic data; class 1 is the positive class.
    pub fn from_synth(data: &SynthData) -> Self {
        let truth = data.truth.iter().map(|&c| Some(c == 1)).collect();
        let seeds = data
            .seeds
            .iter()
            .map(|&i| (NodeId::from(i), if data.truth[i] == 1 { 1.0 } else { 0.0 }))
            .collect();
        SensitivityInput {
            graph: data.graph(),
            truth,
            seeds,
            reveal: None,
        }
    }

    /// Truth and seed entries read as binary labels; names absent from the
    /// graph are ignored.
    pub fn from_labels(graph: Graph, truth: &[LabelEntry], seeds: &[LabelEntry]) -> Result<Self> {
        let mut t = vec![None; graph.node_count()];
        for e in truth {
            if e.value != 0.0 && e.value != 1.0 {
                return Err(Error::validation(format!("truth for {} must be 0 or 1", e.name)));
            }
            if let Some(v) = graph.node_id(&e.name) {
                t[v.index()] = Some(e.value == 1.0);
            }
        }
        let seeds = seeds
            .iter()
            .filter_map(|e| graph.node_id(&e.name).map(|v| (v, e.value)))
            .collect();
        Ok(SensitivityInput {
            graph,
            truth: t,
            seeds,
            reveal: None,
        })
    }

    fn seeds_for(&self, rep: usize, root: u64) -> Vec<(NodeId, f64)> {
        let Some(fraction) = self.reveal else {
            return self.seeds.clone();
        };
        let mut labeled: Vec<(NodeId, f64)> = self
            .truth
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|p| (NodeId::from(i), if p { 1.0 } else { 0.0 })))
            .collect();
        labeled.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(root, &format!("reveal/{rep}"))));
        let take = ((fraction * labeled.len() as f64).round() as usize).min(labeled.len());
        labeled.truncate(take);
        labeled.sort_by_key(|&(v, _)| v);
        labeled
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityRow {
    pub strategy: Strategy,
    pub iterations: usize,
    pub rep: usize,
    /// AUC over labeled non-seed nodes; inactive nodes score 0.5.
    pub auc: Option<f64>,
    pub coverage: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    /// In grid order: strategy, then K, then repetition.
    pub rows: Vec<SensitivityRow>,
}

/// Scores every grid cell on the hidden labels. A failing cell is recorded
/// in its row and the run continues.
pub fn run_sensitivity(input: &SensitivityInput, grid: &ExperimentGrid) -> Result<SensitivityReport> {
    grid.validate()?;
    if input.truth.len() != input.graph.node_count() {
        return Err(Error::Shape {
            expected: input.graph.node_count(),
            found: input.truth.len(),
        });
    }
    let seed_sets: Vec<Vec<(NodeId, f64)>> =
        (0..grid.repetitions).map(|r| input.seeds_for(r, grid.rng_seed)).collect();
    if seed_sets.iter().any(Vec::is_empty) {
        return Err(Error::config("seed set is empty"));
    }

    let mut cells = Vec::with_capacity(grid.cell_count());
    for &strategy in &grid.strategies {
        for &k in &grid.iterations {
            for rep in 0..grid.repetitions {
                cells.push((strategy, k, rep));
            }
        }
    }
    let run = || -> Vec<SensitivityRow> {
        cells
            .par_iter()
            .map(|&(strategy, k, rep)| {
                let (auc, coverage, error) = match score_cell(input, &seed_sets[rep], strategy, k) {
                    Ok((auc, coverage)) => (Some(auc), Some(coverage), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                SensitivityRow {
                    strategy,
                    iterations: k,
                    rep,
                    auc,
                    coverage,
                    error,
                }
            })
            .collect()
    };
    let rows = if grid.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(grid.workers)
            .build()
            .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?
            .install(run)
    } else {
        run()
    };
    Ok(SensitivityReport { rows })
}

fn score_cell(input: &SensitivityInput, seeds: &[(NodeId, f64)], strategy: Strategy, k: usize) -> Result<(f64, f64)> {
    let g = &input.graph;
    let state = LabelState::binary(g.node_count(), seeds)?;
    let out = propagate(g, &state, &PropagationConfig::new(strategy, k))?;
    let mut scores = Vec::new();
    let mut positive = Vec::new();
    for v in g.node_ids() {
        if state.is_seed(v) {
            continue;
        }
        if let Some(p) = input.truth[v.index()] {
            scores.push(out.state.get(v).map_or(0.5, |r| r[0]));
            positive.push(p);
        }
    }
    Ok((roc_auc(&scores, &positive)?, out.coverage))
}

impl SensitivityReport {
    /// Mean AUC over the successful repetitions of one cell.
    pub fn mean_auc(&self, strategy: Strategy, k: usize) -> Option<f64> {
        let aucs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.strategy == strategy && r.iterations == k)
            .filter_map(|r| r.auc)
            .collect();
        (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
    }

    /// Distinct K values in first-appearance order.
    pub fn iterations(&self) -> Vec<usize> {
        let mut ks = Vec::new();
        for r in &self.rows {
            if !ks.contains(&r.iterations) {
                ks.push(r.iterations);
            }
        }
        ks
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.strategy) {
                out.push(r.strategy);
            }
        }
        out
    }

    /// K with the highest mean AUC; the smallest such K on ties.
    pub fn best_iterations(&self, strategy: Strategy) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in self.iterations() {
            if let Some(auc) = self.mean_auc(strategy, k) {
                if best.is_none_or(|(_, b)| auc > b) {
                    best = Some((k, auc));
                }
            }
        }
        best.map(|(k, _)| k)
    }

    /// Long format: `strategy,param,k,rep,auc,coverage,error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,param,k,rep,auc,coverage,error\n");
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let error = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.strategy.name(),
                r.strategy.parameter(),
                r.iterations,
                r.rep,
                opt(r.auc),
                opt(r.coverage),
                error
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Mean AUC with one row per (strategy, parameter) and one column per K.
    pub fn pivot(&self) -> String {
        let ks = self.iterations();
        let mut out = format!("{:<8} {:>6}", "strategy", "param");
        for k in &ks {
            let _ = write!(out, " {:>7}", format!("K={k}"));
        }
        out.push('\n');
        for s in self.strategies() {
            let _ = write!(out, "{:<8} {:>6}", s.name(), s.parameter());
            for &k in &ks {
                match self.mean_auc(s, k) {
                    Some(a) => {
                        let _ = write!(out, " {a:>7.4}");
                    }
                    None => {
                        let _ = write!(out, " {:>7}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, PlantedGraphSpec};

    fn small() -> SensitivityInput {
        let data = generate(&PlantedGraphSpec {
            per_class: 60,
            p: 0.15,
            q: 0.01,
            reveal: 0.2,
            rng_seed: 3,
            ..PlantedGraphSpec::default()
        })
        .unwrap();
        SensitivityInput::from_synth(&data)
    }

    #[test]
    fn covers_full_grid_in_order() {
        let grid = ExperimentGrid::cross(&["alpha", "beta"], &[0.2, 0.8], &[1, 2, 3], 2, 5).unwrap();
        let mut input = small();
        input.reveal = Some(0.2);
        let report = run_sensitivity(&input, &grid).unwrap();
        assert_eq!(report.rows.len(), 2 * 2 * 3 * 2);
        assert_eq!(report.rows[0].strategy, Strategy::Alpha(0.2));
        assert_eq!((report.rows[1].iterations, report.rows[1].rep), (1, 1));
        assert!(report.rows.iter().all(|r| r.auc.is_some()));
        assert_eq!(report.to_csv().lines().count(), 1 + 24);
        assert_eq!(report.pivot().lines().count(), 1 + 4);
        // Reruns agree exactly.
        assert_eq!(run_sensitivity(&input, &grid).unwrap(), report);
    }

    #[test]
    fn multi_hop_beats_one_hop() {
        let grid = ExperimentGrid::cross(&["alpha"], &[0.2], &[1, 2, 3], 1, 1).unwrap();
        let report = run_sensitivity(&small(), &grid).unwrap();
        let a1 = report.mean_auc(Strategy::Alpha(0.2), 1).unwrap();
        for k in [2, 3] {
            assert!(report.mean_auc(Strategy::Alpha(0.2), k).unwrap() > a1);
        }
    }

    #[test]
    fn empty_seeds_rejected_before_running() {
        let mut input = small();
        input.seeds.clear();
        let grid = ExperimentGrid::cross(&["alpha"], &[0.2], &[1], 1, 1).unwrap();
        assert!(matches!(run_sensitivity(&input, &grid), Err(Error::Config(_))));
    }

    #[test]
    fn bad_grids() {
        assert!(ExperimentGrid::cross(&["delta"], &[0.2], &[1], 1, 1).is_err());
        let grid = ExperimentGrid::cross(&["alpha"], &[0.2], &[0], 1, 1).unwrap();
        assert!(grid.validate().is_err());
        let grid = ExperimentGrid::cross(&["alpha"], &[], &[1], 1, 1).unwrap();
        assert!(grid.validate().is_err());
    }
}
