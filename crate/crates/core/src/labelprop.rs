//! Bulk-synchronous label propagation over an undirected [`Graph`].
//!
//! Every superstep reads the previous superstep's buffer and writes a fresh
//! one, so the result does not depend on update order or worker count. Seed
//! nodes never change. A node only averages over neighbors that were active
//! at the end of the previous superstep; an inactive node that gains an
//! active neighbor activates with the plain neighbor mean (for the damped
//! strategies) or with `gamma * mean` (for the accumulating strategy).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Number of age buckets: <=17, 18-24, 25-34, 35-44, 45-54, 55-64, 65+.
pub const AGE_BUCKETS: usize = 7;

/// Maps an age in years onto its bucket index. 17 falls into bucket 0.
pub fn age_bucket(age: i64) -> Result<usize> {
    let bucket = match age {
        a if a < 0 => return Err(Error::validation(format!("negative age {a}"))),
        0..=17 => 0,
        18..=24 => 1,
        25..=34 => 2,
        35..=44 => 3,
        45..=54 => 4,
        55..=64 => 5,
        _ => 6,
    };
    Ok(bucket)
}

/// Per-node label vectors with seed and activation flags.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelState {
    channels: usize,
    values: Vec<f64>,
    seed: Vec<bool>,
    active: Vec<bool>,
}

impl LabelState {
    /// An all-inactive state over `nodes` nodes.
    pub fn new(nodes: usize, channels: usize) -> Self {
        assert!(channels >= 1);
        LabelState {
            channels,
            values: vec![0.0; nodes * channels],
            seed: vec![false; nodes],
            active: vec![false; nodes],
        }
    }

    /// Scalar seeds holding the probability of the positive class.
    pub fn binary(nodes: usize, seeds: &[(NodeId, f64)]) -> Result<Self> {
        let mut state = LabelState::new(nodes, 1);
        for &(v, y) in seeds {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::validation(format!(
                    "binary label {y} at node {} outside [0,1]",
                    v.0
                )));
            }
            state.set_seed(v, &[y])?;
        }
        Ok(state)
    }

    /// One-hot seeds over `classes` channels.
    pub fn one_hot(nodes: usize, classes: usize, seeds: &[(NodeId, usize)]) -> Result<Self> {
        let mut state = LabelState::new(nodes, classes);
        let mut row = vec![0.0; classes];
        for &(v, c) in seeds {
            if c >= classes {
                return Err(Error::validation(format!(
                    "class index {c} at node {} outside [0,{classes})",
                    v.0
                )));
            }
            row.fill(0.0);
            row[c] = 1.0;
            state.set_seed(v, &row)?;
        }
        Ok(state)
    }

    pub fn set_seed(&mut self, v: NodeId, value: &[f64]) -> Result<()> {
        let i = v.index();
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        if value.len() != self.channels {
            return Err(Error::Shape {
                expected: self.channels,
                found: value.len(),
            });
        }
        self.values[i * self.channels..(i + 1) * self.channels].copy_from_slice(value);
        self.seed[i] = true;
        self.active[i] = true;
        Ok(())
    }

    /// Copy holding only the seeds for which `keep` returns true.
    pub fn restrict_seeds(&self, mut keep: impl FnMut(NodeId) -> bool) -> Self {
        let mut out = LabelState::new(self.len(), self.channels);
        for v in self.seed_nodes() {
            if keep(v) {
                out.set_seed(v, self.row(v.index())).expect("same shape");
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.seed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seed.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Label vector of `v`, or `None` while `v` is inactive.
    pub fn get(&self, v: NodeId) -> Option<&[f64]> {
        let i = v.index();
        self.active[i].then(|| self.row(i))
    }

    pub fn is_seed(&self, v: NodeId) -> bool {
        self.seed[v.index()]
    }

    pub fn is_active(&self, v: NodeId) -> bool {
        self.active[v.index()]
    }

    pub fn seed_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.seed
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| NodeId::from(i))
    }

    pub fn seed_count(&self) -> usize {
        self.seed.iter().filter(|&&s| s).count()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Fraction of nodes holding a label.
    pub fn coverage(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.active_count() as f64 / self.len() as f64
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Strategy {
    /// `y <- alpha * y + (1 - alpha) * mean(neighbors)`.
    Alpha(f64),
    /// `y <- (1 - beta^k) * y + beta^k * mean(neighbors)`, `k` counted from 1.
    Beta(f64),
    /// Per-channel accumulation `y <- y + gamma * mean(neighbors)`,
    /// normalized once after the last superstep.
    Gamma(f64),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Alpha(_) => "alpha",
            Strategy::Beta(_) => "beta",
            Strategy::Gamma(_) => "gamma",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Strategy::Alpha(x) | Strategy::Beta(x) | Strategy::Gamma(x) => x,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PropagationConfig {
    pub strategy: Strategy,
    /// Number of supersteps K.
    pub iterations: usize,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            strategy: Strategy::Alpha(0.3),
            iterations: 3,
            workers: 0,
        }
    }
}

impl PropagationConfig {
    pub fn new(strategy: Strategy, iterations: usize) -> Self {
        PropagationConfig {
            strategy,
            iterations,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iteration count K must be at least 1"));
        }
        match self.strategy {
            Strategy::Alpha(a) if !(0.0..=1.0).contains(&a) => {
                Err(Error::config(format!("alpha {a} outside [0,1]")))
            }
            Strategy::Beta(b) if !(0.0..=1.0).contains(&b) => {
                Err(Error::config(format!("beta {b} outside [0,1]")))
            }
            Strategy::Gamma(g) if !(0.0..1.0).contains(&g) => {
                Err(Error::config(format!("gamma {g} outside [0,1)")))
            }
            _ => Ok(()),
        }
    }
}

/// Output of a propagation run.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub state: LabelState,
    /// Fraction of nodes active after the final superstep.
    pub coverage: f64,
    /// Largest absolute change at any node active before and after each
    /// superstep. Diagnostic only; runs always take exactly K supersteps.
    pub deltas: Vec<f64>,
}

/// Runs `cfg.iterations` supersteps of the configured strategy.
pub fn propagate(g: &Graph, seeds: &LabelState, cfg: &PropagationConfig) -> Result<Propagation> {
    cfg.validate()?;
    if g.node_count() == 0 {
        return Err(Error::config("graph has no nodes"));
    }
    if seeds.len() != g.node_count() {
        return Err(Error::Shape {
            expected: g.node_count(),
            found: seeds.len(),
        });
    }
    if seeds.seed_count() == 0 {
        return Err(Error::config("label propagation needs at least one seed"));
    }
    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
        pool.install(|| run(g, seeds, cfg))
    } else {
        run(g, seeds, cfg)
    }
}

pub fn propagate_beta(g: &Graph, seeds: &LabelState, beta: f64, iterations: usize) -> Result<Propagation> {
    propagate(g, seeds, &PropagationConfig::new(Strategy::Beta(beta), iterations))
}

pub fn propagate_gamma(g: &Graph, seeds: &LabelState, gamma: f64, iterations: usize) -> Result<Propagation> {
    propagate(g, seeds, &PropagationConfig::new(Strategy::Gamma(gamma), iterations))
}

/// Propagates one-hot age buckets through seven channels that share a
/// single activation schedule.
pub fn propagate_multiclass(
    g: &Graph,
    seed_classes: &[(NodeId, usize)],
    cfg: &PropagationConfig,
) -> Result<Propagation> {
    let seeds = LabelState::one_hot(g.node_count(), AGE_BUCKETS, seed_classes)?;
    propagate(g, &seeds, cfg)
}

fn run(g: &Graph, seeds: &LabelState, cfg: &PropagationConfig) -> Result<Propagation> {
    match cfg.strategy {
        Strategy::Gamma(gamma) => run_gamma(g, seeds, gamma, cfg.iterations),
        _ => {
            let (state, deltas) = supersteps(g, seeds.clone(), cfg.strategy, cfg.iterations);
            let coverage = state.coverage();
            Ok(Propagation { state, coverage, deltas })
        }
    }
}

fn run_gamma(g: &Graph, seeds: &LabelState, gamma: f64, iterations: usize) -> Result<Propagation> {
    // A scalar label is split into (male, female) = (1 - y, y) accumulators.
    let binary = seeds.channels == 1;
    let acc = if binary {
        let mut acc = LabelState::new(seeds.len(), 2);
        for v in seeds.seed_nodes() {
            let y = seeds.row(v.index())[0];
            acc.set_seed(v, &[1.0 - y, y])?;
        }
        acc
    } else {
        seeds.clone()
    };

    let (acc, deltas) = supersteps(g, acc, Strategy::Gamma(gamma), iterations);

    let mut out = LabelState::new(seeds.len(), seeds.channels);
    out.seed.copy_from_slice(&seeds.seed);
    for i in 0..out.len() {
        if seeds.seed[i] {
            out.values[i * out.channels..(i + 1) * out.channels].copy_from_slice(seeds.row(i));
            out.active[i] = true;
        } else if acc.active[i] {
            let row = acc.row(i);
            let total: f64 = row.iter().sum();
            let dst = &mut out.values[i * out.channels..(i + 1) * out.channels];
            if binary {
                // The minority share is snapped to the grid of 1 - share so
                // that swapping the accumulators gives exactly 1 - output.
                let (m, f) = (row[0], row[1]);
                let major = 1.0 - m.min(f) / total;
                dst[0] = if f <= m { 1.0 - major } else { major };
            } else {
                for (d, &x) in dst.iter_mut().zip(row) {
                    *d = x / total;
                }
            }
            out.active[i] = true;
        }
    }
    let coverage = out.coverage();
    Ok(Propagation { state: out, coverage, deltas })
}

fn supersteps(g: &Graph, mut cur: LabelState, strategy: Strategy, iterations: usize) -> (LabelState, Vec<f64>) {
    let c = cur.channels;
    let mut next = cur.clone();
    let mut deltas = Vec::with_capacity(iterations);

    for k in 1..=iterations {
        // (weight on own value, weight on neighbor mean)
        let (own, nbr) = match strategy {
            Strategy::Alpha(a) => (a, 1.0 - a),
            Strategy::Beta(b) => {
                let w = b.powi(k as i32);
                (1.0 - w, w)
            }
            Strategy::Gamma(gm) => (1.0, gm),
        };
        let accumulate = matches!(strategy, Strategy::Gamma(_));

        let prev = &cur;
        next.values
            .par_chunks_mut(c)
            .zip(next.active.par_iter_mut())
            .enumerate()
            .for_each(|(i, (out, out_active))| {
                let was_active = prev.active[i];
                if prev.seed[i] {
                    out.copy_from_slice(prev.row(i));
                    *out_active = true;
                    return;
                }
                out.fill(0.0);
                let mut count = 0usize;
                for &j in g.adj(i) {
                    let j = j.index();
                    if prev.active[j] {
                        count += 1;
                        for (o, &x) in out.iter_mut().zip(prev.row(j)) {
                            *o += x;
                        }
                    }
                }
                if count == 0 {
                    out.copy_from_slice(prev.row(i));
                    *out_active = was_active;
                    return;
                }
                let inv = count as f64;
                if was_active {
                    for (o, &y) in out.iter_mut().zip(prev.row(i)) {
                        *o = own * y + nbr * (*o / inv);
                    }
                    *out_active = true;
                } else if accumulate {
                    for o in out.iter_mut() {
                        *o = nbr * (*o / inv);
                    }
                    *out_active = out.iter().sum::<f64>() > 0.0;
                    if !*out_active {
                        out.fill(0.0);
                    }
                } else {
                    for o in out.iter_mut() {
                        *o /= inv;
                    }
                    *out_active = true;
                }
            });

        let delta = (0..cur.len())
            .filter(|&i| cur.active[i] && next.active[i])
            .map(|i| {
                cur.row(i)
                    .iter()
                    .zip(next.row(i))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        deltas.push(delta);
        std::mem::swap(&mut cur, &mut next);
    }
    (cur, deltas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: usize) -> NodeId {
        NodeId::from(i)
    }

    fn value(p: &Propagation, v: usize) -> Option<f64> {
        p.state.get(n(v)).map(|r| r[0])
    }

    #[test]
    fn age_buckets() {
        assert_eq!(age_bucket(30).unwrap(), 2);
        assert_eq!(age_bucket(65).unwrap(), 6);
        assert_eq!(age_bucket(17).unwrap(), 0);
        assert_eq!(age_bucket(0).unwrap(), 0);
        assert_eq!(age_bucket(18).unwrap(), 1);
        assert_eq!(age_bucket(24).unwrap(), 1);
        assert_eq!(age_bucket(64).unwrap(), 5);
        assert_eq!(age_bucket(120).unwrap(), 6);
        assert!(matches!(age_bucket(-1), Err(Error::Validation(_))));
    }

    #[test]
    fn symmetric_first_activation() {
        // A(0) - C(2) - B(1)
        let g = Graph::from_index_pairs(3, &[(0, 2), (2, 1)]).unwrap();
        let seeds = LabelState::binary(3, &[(n(0), 1.0), (n(1), 0.0)]).unwrap();
        let p = propagate(&g, &seeds, &PropagationConfig::new(Strategy::Alpha(0.5), 1)).unwrap();
        assert_eq!(value(&p, 2), Some(0.5));
        assert_eq!(p.coverage, 1.0);
    }

    #[test]
    fn chain_trace_two_supersteps() {
        // A(0)=1, B(1)=0, C(2), D(3); edges A-C, B-C, C-D.
        let g = Graph::from_index_pairs(4, &[(0, 2), (1, 2), (2, 3)]).unwrap();
        let seeds = LabelState::binary(4, &[(n(0), 1.0), (n(1), 0.0)]).unwrap();
        let one = propagate(&g, &seeds, &PropagationConfig::new(Strategy::Alpha(0.3), 1)).unwrap();
        assert_eq!(value(&one, 2), Some(0.5));
        assert_eq!(value(&one, 3), None);
        assert_eq!(one.coverage, 0.75);

        let two = propagate(&g, &seeds, &PropagationConfig::new(Strategy::Alpha(0.3), 2)).unwrap();
        assert_eq!(value(&two, 3), Some(0.5));
        // D was inactive at the end of step 1, so C still averages over {A, B}.
        assert!((value(&two, 2).unwrap() - (0.3 * 0.5 + 0.7 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn all_seeded_is_identity() {
        let g = Graph::from_index_pairs(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let seeds = LabelState::binary(4, &[(n(0), 0.1), (n(1), 0.9), (n(2), 0.4), (n(3), 1.0)]).unwrap();
        for k in 1..5 {
            for s in [Strategy::Alpha(0.3), Strategy::Beta(0.8), Strategy::Gamma(0.9)] {
                let p = propagate(&g, &seeds, &PropagationConfig::new(s, k)).unwrap();
                assert_eq!(p.state, seeds);
            }
        }
    }

    #[test]
    fn beta_limits() {
        let g = Graph::from_index_pairs(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]).unwrap();
        let seeds = LabelState::binary(6, &[(n(0), 1.0), (n(5), 0.0)]).unwrap();
        for k in 1..6 {
            let b1 = propagate_beta(&g, &seeds, 1.0, k).unwrap();
            let a0 = propagate(&g, &seeds, &PropagationConfig::new(Strategy::Alpha(0.0), k)).unwrap();
            assert_eq!(b1.state, a0.state);
        }
        // beta = 0: each node keeps the value it activated with.
        let first = propagate_beta(&g, &seeds, 0.0, 3).unwrap();
        let later = propagate_beta(&g, &seeds, 0.0, 8).unwrap();
        for v in 0..6 {
            if let Some(x) = value(&first, v) {
                assert_eq!(value(&later, v), Some(x));
            }
        }
    }

    #[test]
    fn beta_star_leaves_stay_one() {
        let g = Graph::from_index_pairs(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let seeds = LabelState::binary(5, &[(n(0), 1.0)]).unwrap();
        for k in 1..=3 {
            let p = propagate_beta(&g, &seeds, 0.8, k).unwrap();
            for leaf in 1..5 {
                assert_eq!(value(&p, leaf), Some(1.0));
            }
        }
    }

    #[test]
    fn gamma_hand_computation() {
        // Node 3 with male seeds 0, 1 and female seed 2.
        let g = Graph::from_index_pairs(4, &[(0, 3), (1, 3), (2, 3)]).unwrap();
        let seeds = LabelState::binary(4, &[(n(0), 0.0), (n(1), 0.0), (n(2), 1.0)]).unwrap();
        let p = propagate_gamma(&g, &seeds, 0.9, 1).unwrap();
        let expected = (0.9 * 1.0 / 3.0) / (0.9 * 2.0 / 3.0 + 0.9 * 1.0 / 3.0);
        assert!((value(&p, 3).unwrap() - expected).abs() < 1e-15);
        assert!((value(&p, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_zero_never_activates() {
        let g = Graph::from_index_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let seeds = LabelState::binary(3, &[(n(0), 1.0)]).unwrap();
        let p = propagate_gamma(&g, &seeds, 0.0, 4).unwrap();
        assert_eq!(value(&p, 1), None);
        assert_eq!(value(&p, 2), None);
    }

    #[test]
    fn gamma_symmetric_neighborhood_is_half() {
        let g = Graph::from_index_pairs(5, &[(0, 2), (1, 2), (2, 3), (3, 4)]).unwrap();
        let seeds = LabelState::binary(5, &[(n(0), 1.0), (n(1), 0.0)]).unwrap();
        for k in 1..6 {
            let p = propagate_gamma(&g, &seeds, 0.9, k).unwrap();
            assert_eq!(value(&p, 2), Some(0.5));
        }
    }

    #[test]
    fn multiclass_examples() {
        let g = Graph::from_index_pairs(3, &[(0, 2), (1, 2)]).unwrap();
        let p = propagate_multiclass(&g, &[(n(0), 1), (n(1), 3)], &PropagationConfig::new(Strategy::Alpha(0.5), 1)).unwrap();
        assert_eq!(p.state.get(n(2)).unwrap(), &[0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0]);

        let g = Graph::from_index_pairs(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let p = propagate_multiclass(&g, &[(n(0), 4), (n(4), 4)], &PropagationConfig::default()).unwrap();
        for v in g.node_ids() {
            let row = p.state.get(v).unwrap();
            assert_eq!(row[4], 1.0);
        }

        assert!(matches!(
            propagate_multiclass(&g, &[(n(0), 7)], &PropagationConfig::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn configuration_errors() {
        let g = Graph::from_index_pairs(2, &[(0, 1)]).unwrap();
        let none = LabelState::new(2, 1);
        assert!(matches!(
            propagate(&g, &none, &PropagationConfig::default()),
            Err(Error::Config(_))
        ));
        let seeds = LabelState::binary(2, &[(n(0), 1.0)]).unwrap();
        for cfg in [
            PropagationConfig::new(Strategy::Alpha(0.3), 0),
            PropagationConfig::new(Strategy::Alpha(1.5), 1),
            PropagationConfig::new(Strategy::Beta(-0.1), 1),
            PropagationConfig::new(Strategy::Gamma(1.0), 1),
        ] {
            assert!(matches!(propagate(&g, &seeds, &cfg), Err(Error::Config(_))));
        }
        assert!(LabelState::binary(2, &[(n(0), 1.5)]).is_err());
    }

    #[test]
    fn isolated_nodes_stay_inactive() {
        let g = Graph::from_index_pairs(4, &[(0, 1)]).unwrap();
        let seeds = LabelState::binary(4, &[(n(0), 1.0)]).unwrap();
        let p = propagate(&g, &seeds, &PropagationConfig::new(Strategy::Alpha(0.3), 5)).unwrap();
        assert_eq!(p.coverage, 0.5);
        assert_eq!(p.deltas.len(), 5);
        assert!(!p.state.is_active(n(2)));
    }
}
