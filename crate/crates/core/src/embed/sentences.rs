use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{create, EdgeList, Interner, NodeId};

/// One sentence per follower: the node plus everything it follows, shuffled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceCorpus {
    pub tokens: Interner,
    pub sentences: Vec<Vec<NodeId>>,
}

impl SentenceCorpus {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        for s in &self.sentences {
            let line: Vec<&str> = s.iter().map(|&t| self.tokens.name(t)).collect();
            writeln!(w, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    /// One sentence per non-blank line, whitespace-separated tokens.
    pub fn parse(text: &str) -> Self {
        let mut tokens = Interner::new();
        let sentences = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(|t| tokens.intern(t)).collect())
            .collect();
        SentenceCorpus { tokens, sentences }
    }
}

/// Builds the neighbor-sentence corpus. Node `v`'s permutation is drawn from
/// stream `v` of a ChaCha8 generator keyed by `rng_seed`, so sentences are
/// independent of each other and of thread scheduling. Nodes with nothing to
/// list produce no sentence. With `bidirectional`, followers are listed too.
pub fn build_sentences(edges: &EdgeList, rng_seed: u64, bidirectional: bool) -> SentenceCorpus {
    let adjacency = edges.out_adjacency(bidirectional);
    let sentences = adjacency
        .par_iter()
        .enumerate()
        .filter(|(_, out)| !out.is_empty())
        .map(|(v, out)| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(v as u64);
            let mut sentence = Vec::with_capacity(out.len() + 1);
            sentence.push(NodeId::from(v));
            sentence.extend_from_slice(out);
            sentence.shuffle(&mut rng);
            sentence
        })
        .collect();
    SentenceCorpus {
        tokens: edges.nodes.clone(),
        sentences,
    }
}
