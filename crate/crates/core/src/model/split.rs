use std::hash::Hasher;

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum SplitSpec {
    /// Train iff `(fnv1a64(name) mod 10000) / 10000 < train_fraction`.
    /// Assignment is pointwise, so growing the id set never moves a node.
    Hash { train_fraction: f64 },
    /// Seeded shuffle, then the first `round(fraction * n)` rows train.
    Random { train_fraction: f64, rng_seed: u64 },
}

impl SplitSpec {
    pub fn hash() -> Self {
        SplitSpec::Hash { train_fraction: 0.75 }
    }

    pub fn random(rng_seed: u64) -> Self {
        SplitSpec::Random {
            train_fraction: 0.70,
            rng_seed,
        }
    }

    pub fn train_fraction(&self) -> f64 {
        match *self {
            SplitSpec::Hash { train_fraction } | SplitSpec::Random { train_fraction, .. } => train_fraction,
        }
    }
}

/// 64-bit FNV-1a over the UTF-8 bytes of `name`.
pub fn stable_hash(name: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(name.as_bytes());
    h.finish()
}

pub fn is_train(name: &str, train_fraction: f64) -> bool {
    (stable_hash(name) % 10_000) as f64 / 10_000.0 < train_fraction
}

/// Splits row indices of `names` into (train, test), each in input order.
pub fn split(names: &[String], spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let fraction = spec.train_fraction();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("train fraction {fraction} outside (0,1)")));
    }
    if names.is_empty() {
        return Err(Error::validation("nothing to split"));
    }
    match spec {
        SplitSpec::Hash { train_fraction } => {
            Ok((0..names.len()).partition(|&i| is_train(&names[i], train_fraction)))
        }
        SplitSpec::Random { train_fraction, rng_seed } => {
            let mut order: Vec<usize> = (0..names.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
            let cut = (train_fraction * names.len() as f64).round() as usize;
            let mut train = order[..cut].to_vec();
            let mut test = order[cut..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Ok((train, test))
        }
    }
}
