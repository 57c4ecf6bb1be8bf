//! Planted-partition following graphs with known labels.
//!
//! Node `i` belongs to class `i / per_class`. Every intra-class pair is
//! linked with probability `p` and every inter-class pair with `q`; links
//! are mutual follows. A uniform random subset of nodes is revealed as
//! seeds, and the "cumulative" feature block is the one-hot class plus
//! isotropic Gaussian noise of scale `noise`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{create, EdgeList, Graph, Interner, NodeId};
use crate::model::FeatureBlock;

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedGraphSpec {
    pub per_class: usize,
    pub classes: usize,
    /// Intra-class link probability.
    pub p: f64,
    /// Inter-class link probability.
    pub q: f64,
    /// Fraction of nodes revealed as seeds.
    pub reveal: f64,
    pub noise: f64,
    pub rng_seed: u64,
    /// Permit `q > p`.
    pub allow_anti_homophily: bool,
}

impl Default for PlantedGraphSpec {
    fn default() -> Self {
        PlantedGraphSpec {
            per_class: 2000,
            classes: 2,
            p: 0.01,
            q: 0.001,
            reveal: 0.2,
            noise: 1.0,
            rng_seed: 1,
            allow_anti_homophily: false,
        }
    }
}

impl PlantedGraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 || self.classes < 2 {
            return Err(Error::validation("need at least 2 classes with at least 1 node each"));
        }
        for (name, x) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::validation(format!("{name} = {x} outside [0,1]")));
            }
        }
        if self.p < self.q && !self.allow_anti_homophily {
            return Err(Error::validation(format!(
                "p = {} < q = {}: anti-homophily must be requested explicitly",
                self.p, self.q
            )));
        }
        if !(self.reveal > 0.0 && self.reveal < 1.0) {
            return Err(Error::validation(format!("reveal fraction {} outside (0,1)", self.reveal)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::validation("noise scale must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.per_class * self.classes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub names: Vec<String>,
    pub truth: Vec<usize>,
    /// Undirected pairs `(u, v)` with `u < v`, in generation order.
    pub edges: Vec<(usize, usize)>,
    /// Revealed node indices, ascending.
    pub seeds: Vec<usize>,
    pub classes: usize,
    /// Row-major `n x classes`.
    pub features: Vec<f64>,
}

pub fn generate(spec: &PlantedGraphSpec) -> Result<SynthData> {
    spec.validate()?;
    let n = spec.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let truth: Vec<usize> = (0..n).map(|i| i / spec.per_class).collect();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if truth[u] == truth[v] { spec.p } else { spec.q };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let revealed = ((spec.reveal * n as f64).round() as usize).clamp(1, n);
    let mut seeds = order[..revealed].to_vec();
    seeds.sort_unstable();

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = vec![0.0; n * spec.classes];
    for (i, row) in features.chunks_exact_mut(spec.classes).enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            let one_hot = if c == truth[i] { 1.0 } else { 0.0 };
            *x = one_hot + spec.noise * normal.sample(&mut rng);
        }
    }

    Ok(SynthData {
        names: (0..n).map(|i| format!("u{i}")).collect(),
        truth,
        edges,
        seeds,
        classes: spec.classes,
        features,
    })
}

impl SynthData {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn graph(&self) -> Graph {
        let nodes = Interner::from_names(self.names.iter().cloned()).expect("unique names");
        let pairs: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v)| (NodeId::from(u), NodeId::from(v)))
            .collect();
        Graph::from_pairs(nodes, &pairs).expect("valid pairs")
    }

    /// Directed form: each link written in both directions.
    pub fn edge_list(&self) -> EdgeList {
        EdgeList::from_named(
            self.edges
                .iter()
                .flat_map(|&(u, v)| [(u, v), (v, u)])
                .map(|(u, v)| (self.names[u].as_str(), self.names[v].as_str())),
        )
    }

    pub fn feature_block(&self, name: &str) -> FeatureBlock {
        let mut block = FeatureBlock::new(name, (0..self.classes).map(|c| format!("f{c}")).collect());
        for (i, row) in self.features.chunks_exact(self.classes).enumerate() {
            block.push_row(self.names[i].clone(), row);
        }
        block
    }

    /// Writes `edges.tsv`, `truth.tsv`, `seeds.tsv` and `cumf.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let path = dir.join("edges.tsv");
        let mut w = create(&path)?;
        for &(u, v) in &self.edges {
            writeln!(w, "{}\t{}\n{}\t{}", self.names[u], self.names[v], self.names[v], self.names[u])
                .map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let write_labels = |file: &str, nodes: &mut dyn Iterator<Item = usize>| -> Result<()> {
            let path = dir.join(file);
            let mut w = create(&path)?;
            for i in nodes {
                writeln!(w, "{}\t{}", self.names[i], self.truth[i]).map_err(|e| Error::io(&path, e))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))
        };
        write_labels("truth.tsv", &mut (0..self.node_count()))?;
        write_labels("seeds.tsv", &mut self.seeds.iter().copied())?;

        self.feature_block("cumf").write_csv(dir.join("cumf.csv"))
    }
}
