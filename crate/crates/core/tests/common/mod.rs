//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;

/// Propagation rule for the dense reference.
#[derive(Copy, Clone, Debug)]
pub enum Rule {
    Alpha(f64),
    Beta(f64),
    Gamma(f64),
}

/// Dense-matrix label propagation. Each superstep forms the adjacency
/// matrix restricted to active columns, row-normalizes it and multiplies by
/// the value matrix. Seeds are fixed; a node's first value is the plain
/// neighbor mean (scaled by gamma under `Rule::Gamma`, whose scalar seeds
/// become `(1 - y, y)` accumulators normalized after the last step).
pub fn dense_propagate(
    n: usize,
    edges: &[(usize, usize)],
    seeds: &[Option<Vec<f64>>],
    rule: Rule,
    k: usize,
) -> Vec<Option<Vec<f64>>> {
    let mut adj = vec![vec![0.0; n]; n];
    for &(u, v) in edges {
        if u != v {
            adj[u][v] = 1.0;
            adj[v][u] = 1.0;
        }
    }
    let scalar = seeds.iter().flatten().next().map_or(1, Vec::len) == 1;
    let gamma = matches!(rule, Rule::Gamma(_));
    let lift = |y: &Vec<f64>| if gamma && scalar { vec![1.0 - y[0], y[0]] } else { y.clone() };
    let c = seeds.iter().flatten().next().map(|y| lift(y).len()).unwrap_or(1);

    let mut y = vec![vec![0.0; c]; n];
    let mut active = vec![false; n];
    for (i, s) in seeds.iter().enumerate() {
        if let Some(v) = s {
            y[i] = lift(v);
            active[i] = true;
        }
    }

    for step in 1..=k {
        // Row-normalized adjacency over active columns.
        let mut p = vec![vec![0.0; n]; n];
        for i in 0..n {
            let r: f64 = (0..n).map(|j| adj[i][j] * f64::from(u8::from(active[j]))).sum();
            if r > 0.0 {
                for j in 0..n {
                    p[i][j] = adj[i][j] * f64::from(u8::from(active[j])) / r;
                }
            }
        }
        let z: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..c).map(|ch| (0..n).map(|j| p[i][j] * y[j][ch]).sum()).collect())
            .collect();
        let reached: Vec<bool> = (0..n).map(|i| p[i].iter().any(|&x| x > 0.0)).collect();

        let mut ny = y.clone();
        let mut na = active.clone();
        for i in 0..n {
            if seeds[i].is_some() || !reached[i] {
                continue;
            }
            let (own, nbr) = match rule {
                Rule::Alpha(a) => (a, 1.0 - a),
                Rule::Beta(b) => (1.0 - b.powi(step as i32), b.powi(step as i32)),
                Rule::Gamma(g) => (1.0, g),
            };
            if active[i] {
                ny[i] = (0..c).map(|ch| own * y[i][ch] + nbr * z[i][ch]).collect();
            } else if gamma {
                let acc: Vec<f64> = z[i].iter().map(|x| nbr * x).collect();
                if acc.iter().sum::<f64>() > 0.0 {
                    ny[i] = acc;
                    na[i] = true;
                }
            } else {
                ny[i] = z[i].clone();
                na[i] = true;
            }
        }
        y = ny;
        active = na;
    }

    (0..n)
        .map(|i| {
            if let Some(s) = &seeds[i] {
                return Some(s.clone());
            }
            if !active[i] {
                return None;
            }
            if !gamma {
                return Some(y[i].clone());
            }
            let total: f64 = y[i].iter().sum();
            if scalar {
                Some(vec![y[i][1] / total])
            } else {
                Some(y[i].iter().map(|x| x / total).collect())
            }
        })
        .collect()
}

/// Random simple undirected graph as `(u, v)` pairs with `u < v`.
pub fn random_edges(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Pairwise AUC over every (positive, negative) pair; ties count 1/2.
pub fn brute_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &pi) in positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Central finite differences of `f` at `x`.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
