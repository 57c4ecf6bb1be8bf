mod common;

use std::collections::BTreeSet;
use std::io::Cursor;

use common::random_edges;
use demograph_core::graph::{load_edge_list, EdgeList, Graph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn named_adjacency(g: &Graph) -> BTreeSet<(String, Vec<String>)> {
    g.node_ids()
        .map(|v| {
            let mut nbrs: Vec<String> = g.neighbors(v).unwrap().iter().map(|&u| g.name(u).to_owned()).collect();
            nbrs.sort();
            (g.name(v).to_owned(), nbrs)
        })
        .collect()
}

/// Random directed edge text over names `b0..`, with duplicates and loops.
fn edge_text(seed: u64, n: usize, p: f64) -> String {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("# generated\n");
    for (u, v) in random_edges(&mut rng, n, p) {
        let (a, b) = if rng.random::<bool>() { (u, v) } else { (v, u) };
        text.push_str(&format!("b{a}\tb{b}\n"));
        if rng.random::<f64>() < 0.2 {
            text.push_str(&format!("b{b} b{a}\n"));
        }
        if rng.random::<f64>() < 0.05 {
            text.push_str(&format!("b{a}\tb{a}\n"));
        }
    }
    text
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn degree_sum_is_twice_edge_count(seed in any::<u64>(), n in 2usize..60, p in 0.02f64..0.5) {
        let text = edge_text(seed, n, p);
        prop_assume!(text.lines().count() > 1);
        let list = EdgeList::parse(Cursor::new(text), "mem").unwrap();
        let g = Graph::from_edge_list(&list, 0, true).unwrap();
        let total: usize = g.node_ids().map(|v| g.degree(v)).sum();
        prop_assert_eq!(total % 2, 0);
        prop_assert_eq!(total, 2 * g.edge_count());
        for v in g.node_ids() {
            let nbrs = g.neighbors(v).unwrap();
            prop_assert!(nbrs.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!nbrs.contains(&v));
            for &u in nbrs {
                prop_assert!(g.neighbors(u).unwrap().contains(&v));
            }
        }
    }

    #[test]
    fn write_then_reload_is_identity(seed in any::<u64>(), n in 2usize..60, p in 0.02f64..0.5) {
        let text = edge_text(seed, n, p);
        prop_assume!(text.lines().count() > 1);
        let list = EdgeList::parse(Cursor::new(text), "mem").unwrap();
        let g = Graph::from_edge_list(&list, 0, true).unwrap();
        prop_assume!(g.edge_count() > 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        g.write_edge_list(&path).unwrap();
        let back = load_edge_list(&path, 0, true).unwrap();
        prop_assert_eq!(back.edge_count(), g.edge_count());
        let connected: BTreeSet<_> = named_adjacency(&g).into_iter().filter(|(_, n)| !n.is_empty()).collect();
        prop_assert_eq!(named_adjacency(&back), connected);
        // Writing the reloaded graph reproduces the same file.
        let again = dir.path().join("again.tsv");
        back.write_edge_list(&again).unwrap();
        let reloaded = load_edge_list(&again, 0, true).unwrap();
        prop_assert_eq!(named_adjacency(&reloaded), named_adjacency(&back));
    }

    #[test]
    fn interning_round_trips(seed in any::<u64>(), n in 2usize..60) {
        let text = edge_text(seed, n, 0.2);
        prop_assume!(text.lines().count() > 1);
        let list = EdgeList::parse(Cursor::new(text), "mem").unwrap();
        let g = Graph::from_edge_list(&list, 0, true).unwrap();
        for v in g.node_ids() {
            prop_assert_eq!(g.node_id(g.name(v)), Some(v));
        }
        for (i, name) in g.nodes().names().iter().enumerate() {
            prop_assert_eq!(g.node_id(name).map(|v| v.index()), Some(i));
        }
    }

    #[test]
    fn degree_filter_matches_scalar_reference(seed in any::<u64>(), n in 3usize..40, min_degree in 1usize..5) {
        let text = edge_text(seed, n, 0.15);
        prop_assume!(text.lines().count() > 1);
        let list = EdgeList::parse(Cursor::new(text.clone()), "mem").unwrap();
        // Reference: count distinct non-loop out-targets per source.
        let mut out: std::collections::BTreeMap<&str, BTreeSet<&str>> = Default::default();
        let mut pairs = Vec::new();
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            let mut it = line.split_whitespace();
            let (a, b) = (it.next().unwrap(), it.next().unwrap());
            pairs.push((a, b));
            if a != b {
                out.entry(a).or_default().insert(b);
            }
        }
        let keep = |x: &str| out.get(x).map_or(0, BTreeSet::len) >= min_degree;
        let mut expect: BTreeSet<(String, String)> = BTreeSet::new();
        for (a, b) in pairs {
            if a != b && keep(a) && keep(b) {
                let (x, y) = if a < b { (a, b) } else { (b, a) };
                expect.insert((x.to_owned(), y.to_owned()));
            }
        }
        match Graph::from_edge_list(&list, min_degree, true) {
            Ok(g) => {
                let got: BTreeSet<(String, String)> = g
                    .edges()
                    .map(|(u, v)| {
                        let (x, y) = (g.name(u).to_owned(), g.name(v).to_owned());
                        if x < y { (x, y) } else { (y, x) }
                    })
                    .collect();
                prop_assert_eq!(got, expect);
                for v in g.node_ids() {
                    prop_assert!(keep(g.name(v)));
                }
            }
            Err(_) => prop_assert!(expect.is_empty()),
        }
    }
}
