//! Label-propagation features from an ensemble of partial seed sets.
//!
//! The labeled nodes are split into N balanced random partitions and one
//! propagation runs per partition. Column `i` of a node's feature vector is
//! run `i`'s label at that node, except for a labeled node that seeded run
//! `i`: its column `i` is the mean of the other runs, so a node never sees
//! its own label.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{create, Graph, NodeId};
use crate::labelprop::{propagate, LabelState, PropagationConfig};
use crate::labels::fmt_real;

/// Default number of partitions.
pub const DEFAULT_SPLITS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    parts: usize,
    /// Sorted by node.
    assignment: Vec<(NodeId, usize)>,
    rng_seed: u64,
}

impl PartitionPlan {
    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn assignment(&self) -> &[(NodeId, usize)] {
        &self.assignment
    }

    pub fn part_of(&self, v: NodeId) -> Option<usize> {
        self.assignment
            .binary_search_by_key(&v, |&(u, _)| u)
            .ok()
            .map(|i| self.assignment[i].1)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.parts];
        for &(_, p) in &self.assignment {
            sizes[p] += 1;
        }
        sizes
    }

    /// Same plan with partition `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        PartitionPlan {
            parts: self.parts,
            assignment: self.assignment.iter().map(|&(v, p)| (v, perm[p])).collect(),
            rng_seed: self.rng_seed,
        }
    }
}

/// Balanced uniform random assignment of `labeled` into `parts` partitions.
pub fn make_partitions(labeled: &[NodeId], parts: usize, rng_seed: u64) -> Result<PartitionPlan> {
    let mut nodes = labeled.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    if parts < 2 {
        return Err(Error::config(format!("need at least 2 partitions, got {parts}")));
    }
    if parts > nodes.len() {
        return Err(Error::config(format!(
            "{parts} partitions requested for {} labeled nodes",
            nodes.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut order = nodes.clone();
    order.shuffle(&mut rng);
    let mut assignment: Vec<_> = order.into_iter().enumerate().map(|(i, v)| (v, i % parts)).collect();
    assignment.sort_unstable();
    Ok(PartitionPlan {
        parts,
        assignment,
        rng_seed,
    })
}

/// Per-node LP feature vectors with a validity mask per run.
#[derive(Clone, Debug, PartialEq)]
pub struct LpFeatureBlock {
    parts: usize,
    channels: usize,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl LpFeatureBlock {
    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.present.len() / self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.present.is_empty()
    }

    /// Feature `i` of node `v`, or `None` when masked.
    pub fn get(&self, v: NodeId, i: usize) -> Option<&[f64]> {
        let slot = v.index() * self.parts + i;
        self.present[slot].then(|| &self.values[slot * self.channels..(slot + 1) * self.channels])
    }

    pub fn is_fully_masked(&self, v: NodeId) -> bool {
        (0..self.parts).all(|i| self.get(v, i).is_none())
    }

    /// Column names of [`Self::row`]: values, then presence indicators.
    pub fn column_names(&self) -> Vec<String> {
        let mut cols = Vec::with_capacity(self.width());
        for i in 0..self.parts {
            if self.channels == 1 {
                cols.push(format!("lp_{i}"));
            } else {
                cols.extend((0..self.channels).map(|c| format!("lp_{i}_{c}")));
            }
        }
        cols.extend((0..self.parts).map(|i| format!("lp_present_{i}")));
        cols
    }

    pub fn width(&self) -> usize {
        self.parts * self.channels + self.parts
    }

    /// Fixed-width training row: masked entries are imputed with the uniform
    /// distribution (0.5 for a scalar label), followed by one 0/1 presence
    /// column per run.
    pub fn row(&self, v: NodeId) -> Vec<f64> {
        let fill = if self.channels == 1 { 0.5 } else { 1.0 / self.channels as f64 };
        let mut row = Vec::with_capacity(self.width());
        for i in 0..self.parts {
            match self.get(v, i) {
                Some(x) => row.extend_from_slice(x),
                None => row.extend(std::iter::repeat_n(fill, self.channels)),
            }
        }
        row.extend((0..self.parts).map(|i| if self.get(v, i).is_some() { 1.0 } else { 0.0 }));
        row
    }

    /// CSV with header `node,lp_0..,lp_present_0..`, one row per graph node.
    pub fn write_csv(&self, path: impl AsRef<Path>, g: &Graph) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "node,{}", self.column_names().join(",")).map_err(io)?;
        for v in g.node_ids() {
            let row: Vec<String> = self.row(v).into_iter().map(fmt_real).collect();
            writeln!(w, "{},{}", g.name(v), row.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Runs one propagation per partition and applies the leave-partition-out
/// substitution at labeled nodes.
pub fn lp_features(
    g: &Graph,
    labels: &LabelState,
    plan: &PartitionPlan,
    cfg: &PropagationConfig,
) -> Result<LpFeatureBlock> {
    let seeds: Vec<NodeId> = labels.seed_nodes().collect();
    let covered = seeds.len() == plan.assignment.len()
        && seeds.iter().zip(&plan.assignment).all(|(&a, &(b, _))| a == b);
    if !covered {
        return Err(Error::config(
            "partition plan must cover exactly the labeled nodes",
        ));
    }

    let runs = (0..plan.parts)
        .into_par_iter()
        .map(|i| {
            let part = labels.restrict_seeds(|v| plan.part_of(v) == Some(i));
            propagate(g, &part, cfg).map(|p| p.state)
        })
        .collect::<Result<Vec<_>>>()?;

    assemble_features(&runs, plan)
}

/// Leave-partition-out assembly from per-partition propagation outputs:
/// `runs[i]` is the final state of the run seeded by partition `i`.
pub fn assemble_features(runs: &[LabelState], plan: &PartitionPlan) -> Result<LpFeatureBlock> {
    if runs.len() != plan.parts {
        return Err(Error::Shape {
            expected: plan.parts,
            found: runs.len(),
        });
    }
    let (n, channels) = (runs[0].len(), runs[0].channels());
    if let Some(bad) = runs.iter().find(|r| r.len() != n || r.channels() != channels) {
        return Err(Error::Shape {
            expected: n,
            found: bad.len(),
        });
    }
    let parts = plan.parts;
    let mut values = vec![0.0; n * parts * channels];
    let mut present = vec![false; n * parts];
    let mut others: Vec<&[f64]> = Vec::with_capacity(parts);
    let mut column = Vec::with_capacity(parts);

    for v in (0..n).map(NodeId::from) {
        let own = plan.part_of(v);
        for i in 0..parts {
            let slot = v.index() * parts + i;
            let dst = &mut values[slot * channels..(slot + 1) * channels];
            if own == Some(i) {
                others.clear();
                others.extend(runs.iter().enumerate().filter(|&(j, _)| j != i).filter_map(|(_, r)| r.get(v)));
                if others.is_empty() {
                    continue;
                }
                // Summed in sorted order so the mean does not depend on
                // how partitions are numbered.
                for (c, d) in dst.iter_mut().enumerate() {
                    column.clear();
                    column.extend(others.iter().map(|x| x[c]));
                    column.sort_by(f64::total_cmp);
                    *d = column.iter().sum::<f64>() / others.len() as f64;
                }
                present[slot] = true;
            } else if let Some(x) = runs[i].get(v) {
                dst.copy_from_slice(x);
                present[slot] = true;
            }
        }
    }
    Ok(LpFeatureBlock {
        parts,
        channels,
        values,
        present,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelprop::Strategy;

    fn ids(n: usize) -> Vec<NodeId> {
        (0..n).map(NodeId::from).collect()
    }

    #[test]
    fn partitions_are_balanced_and_deterministic() {
        let plan = make_partitions(&ids(9), 3, 7).unwrap();
        assert_eq!(plan.sizes(), vec![3, 3, 3]);
        assert_eq!(plan, make_partitions(&ids(9), 3, 7).unwrap());

        let mut sizes = make_partitions(&ids(10), 3, 1).unwrap().sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);

        assert!(matches!(make_partitions(&ids(2), 3, 0), Err(Error::Config(_))));
        assert!(matches!(make_partitions(&ids(5), 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn different_seeds_shuffle_differently() {
        let a = make_partitions(&ids(60), 3, 1).unwrap();
        let b = make_partitions(&ids(60), 3, 2).unwrap();
        assert_ne!(a.assignment(), b.assignment());
    }

    /// Unlabeled hub 0 joined to labeled leaves 1..=3, one leaf per partition.
    fn hub_fixture() -> (Graph, LabelState, PartitionPlan) {
        let g = Graph::from_index_pairs(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let labels = LabelState::binary(4, &[(NodeId(1), 0.2), (NodeId(2), 0.4), (NodeId(3), 0.6)]).unwrap();
        let plan = PartitionPlan {
            parts: 3,
            assignment: vec![(NodeId(1), 0), (NodeId(2), 1), (NodeId(3), 2)],
            rng_seed: 0,
        };
        (g, labels, plan)
    }

    #[test]
    fn unlabeled_node_passes_run_outputs_through() {
        let (g, labels, plan) = hub_fixture();
        let block = lp_features(&g, &labels, &plan, &PropagationConfig::new(Strategy::Alpha(0.3), 1)).unwrap();
        let hub: Vec<f64> = (0..3).map(|i| block.get(NodeId(0), i).unwrap()[0]).collect();
        assert_eq!(hub, vec![0.2, 0.4, 0.6]);
    }

    #[test]
    fn labeled_node_gets_leave_out_mean() {
        // After two supersteps every leaf holds each foreign run's seed value.
        let (g, labels, plan) = hub_fixture();
        let cfg = PropagationConfig::new(Strategy::Alpha(0.0), 2);
        let block = lp_features(&g, &labels, &plan, &cfg).unwrap();
        // Node 1 seeded run 0; runs 1 and 2 give it 0.4 and 0.6.
        assert!((block.get(NodeId(1), 0).unwrap()[0] - 0.5).abs() < 1e-15);
        assert_eq!(block.get(NodeId(1), 1).unwrap()[0], 0.4);
        assert_eq!(block.get(NodeId(1), 2).unwrap()[0], 0.6);
    }

    #[test]
    fn two_partitions_use_the_single_other_run() {
        let g = Graph::from_index_pairs(3, &[(0, 1), (1, 2)]).unwrap();
        let labels = LabelState::binary(3, &[(NodeId(0), 1.0), (NodeId(2), 0.3)]).unwrap();
        let plan = PartitionPlan {
            parts: 2,
            assignment: vec![(NodeId(0), 0), (NodeId(2), 1)],
            rng_seed: 0,
        };
        let block = lp_features(&g, &labels, &plan, &PropagationConfig::new(Strategy::Alpha(0.0), 2)).unwrap();
        assert_eq!(block.get(NodeId(0), 0).unwrap()[0], 0.3);
    }

    #[test]
    fn masked_entries_and_rows() {
        // Node 3 is isolated, so every run leaves it inactive.
        let g = Graph::from_index_pairs(4, &[(0, 1), (1, 2)]).unwrap();
        let labels = LabelState::binary(4, &[(NodeId(0), 1.0), (NodeId(2), 0.0)]).unwrap();
        let plan = make_partitions(&[NodeId(0), NodeId(2)], 2, 3).unwrap();
        let block = lp_features(&g, &labels, &plan, &PropagationConfig::default()).unwrap();
        assert!(block.is_fully_masked(NodeId(3)));
        assert_eq!(block.row(NodeId(3)), vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(block.column_names(), ["lp_0", "lp_1", "lp_present_0", "lp_present_1"]);
    }

    #[test]
    fn plan_must_match_seeds() {
        let (g, labels, _) = hub_fixture();
        let plan = make_partitions(&[NodeId(1), NodeId(2)], 2, 0).unwrap();
        assert!(matches!(
            lp_features(&g, &labels, &plan, &PropagationConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn multiclass_columns() {
        let g = Graph::from_index_pairs(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let labels = LabelState::one_hot(4, 7, &[(NodeId(0), 2), (NodeId(3), 5)]).unwrap();
        let plan = make_partitions(&[NodeId(0), NodeId(3)], 2, 0).unwrap();
        let block = lp_features(&g, &labels, &plan, &PropagationConfig::default()).unwrap();
        assert_eq!(block.width(), 16);
        assert_eq!(block.column_names()[8], "lp_1_1");
        for v in g.node_ids() {
            for i in 0..2 {
                if let Some(x) = block.get(v, i) {
                    assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
