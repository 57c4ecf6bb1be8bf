use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{create, Graph, Interner, NodeId};

/// Token vectors in a fixed dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Interner,
    vectors: Vec<f64>,
    counts: Vec<u64>,
    min_count: u64,
}

impl EmbeddingTable {
    pub fn new(dim: usize, tokens: Interner, vectors: Vec<f64>, counts: Vec<u64>, min_count: u64) -> Self {
        assert_eq!(vectors.len(), tokens.len() * dim);
        assert_eq!(counts.len(), tokens.len());
        EmbeddingTable {
            dim,
            tokens,
            vectors,
            counts,
            min_count,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        self.tokens.names()
    }

    /// Corpus frequency of each token, aligned with [`Self::tokens`]. Tables
    /// read from disk carry zeros.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.tokens
            .get(token)
            .map(|t| &self.vectors[t.index() * self.dim..(t.index() + 1) * self.dim])
    }

    /// word2vec text format: `<count> <dim>` header, then `<token> <v1> .. <vd>`.
    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for (i, token) in self.tokens().iter().enumerate() {
            write!(w, "{token}").map_err(io)?;
            for x in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, &path.display().to_string())
    }

    pub fn parse_text(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_owned(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let header: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(1, format!("bad header {header:?}")))?;
        let [count, dim] = header[..] else {
            return Err(err(1, "header must be `<vocab-size> <dim>`".into()));
        };

        let mut tokens = Interner::new();
        let mut vectors = Vec::with_capacity(count * dim);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().expect("non-blank line");
            if tokens.get(token).is_some() {
                return Err(err(i + 1, format!("duplicate token {token:?}")));
            }
            let before = vectors.len();
            for f in fields {
                vectors.push(f.parse::<f64>().map_err(|_| err(i + 1, format!("bad value {f:?}")))?);
            }
            if vectors.len() - before != dim {
                return Err(err(i + 1, format!("expected {dim} values")));
            }
            tokens.intern(token);
        }
        if tokens.len() != count {
            return Err(err(1, format!("header declares {count} vectors, found {}", tokens.len())));
        }
        let n = tokens.len();
        Ok(EmbeddingTable::new(dim, tokens, vectors, vec![0; n], 0))
    }
}

/// Mean of the vectors of `v`'s neighbors that have one. `None` when no
/// neighbor is embedded. Only direct table entries are used.
pub fn coldstart_embedding(g: &Graph, table: &EmbeddingTable, v: NodeId) -> Result<Option<Vec<f64>>> {
    let mut sum = vec![0.0; table.dim()];
    let mut count = 0usize;
    for &u in g.neighbors(v)? {
        if let Some(x) = table.get(g.name(u)) {
            count += 1;
            for (s, &xi) in sum.iter_mut().zip(x) {
                *s += xi;
            }
        }
    }
    if count == 0 {
        return Ok(None);
    }
    for s in &mut sum {
        *s /= count as f64;
    }
    Ok(Some(sum))
}

/// Embedding for every graph node: its own vector when present, otherwise
/// the one-round neighbor average.
pub fn fill_coldstart(g: &Graph, table: &EmbeddingTable) -> Vec<Option<Vec<f64>>> {
    g.node_ids()
        .map(|v| match table.get(g.name(v)) {
            Some(x) => Some(x.to_vec()),
            None => coldstart_embedding(g, table, v).expect("node from graph"),
        })
        .collect()
}
