//! Following-graph ingestion and the immutable undirected adjacency structure
//! every propagation and embedding stage reads from.
//!
//! Edge lists are read once into an [`EdgeList`] (directed, interned, as
//! written), then frozen into a [`Graph`] in compressed sparse row layout.
//! The directed form stays available because sentence construction follows
//! the follow direction while propagation does not.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense node index assigned at interning time.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

/// Bijection between external names and contiguous dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut interner = Interner::new();
        for name in names {
            let name = name.into();
            if interner.get(&name).is_some() {
                return Err(Error::validation(format!("duplicate node name {name:?}")));
            }
            interner.intern(&name);
        }
        Ok(interner)
    }

    pub fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&i) = self.index.get(name) {
            return NodeId(i);
        }
        let id = NodeId::from(self.names.len());
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id.0);
        id
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).map(|&i| NodeId(i))
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Raw directed edges exactly as read, with interned endpoints. Duplicates and
/// self-loops are retained here; [`Graph`] construction drops them.
#[derive(Clone, Debug, Default)]
pub struct EdgeList {
    pub nodes: Interner,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl EdgeList {
    pub fn from_named<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut list = EdgeList::default();
        for (src, dst) in pairs {
            let s = list.nodes.intern(src);
            let t = list.nodes.intern(dst);
            list.edges.push((s, t));
        }
        list
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file), &path.display().to_string())
    }

    /// Parses `<src> <dst>` lines (any whitespace). Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut list = EdgeList::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            match (tokens.next(), tokens.next(), tokens.next()) {
                (Some(src), Some(dst), None) => {
                    let s = list.nodes.intern(src);
                    let t = list.nodes.intern(dst);
                    list.edges.push((s, t));
                }
                _ => {
                    return Err(Error::Parse {
                        path: source.to_owned(),
                        line: i + 1,
                        message: format!("expected two tokens, got {trimmed:?}"),
                    })
                }
            }
        }
        if list.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(list)
    }

    /// Distinct, sorted, self-loop-free adjacency per node. With
    /// `bidirectional` each node also lists the nodes that follow it.
    pub fn out_adjacency(&self, bidirectional: bool) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(s, t) in &self.edges {
            if s == t {
                continue;
            }
            adj[s.index()].push(t);
            if bidirectional {
                adj[t.index()].push(s);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Immutable undirected graph in CSR layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    nodes: Interner,
}

impl Graph {
    /// Builds from undirected pairs over named nodes. Self-loops and repeated
    /// pairs are dropped.
    pub fn from_pairs(nodes: Interner, pairs: &[(NodeId, NodeId)]) -> Result<Self> {
        let n = nodes.len();
        let mut directed = Vec::with_capacity(pairs.len() * 2);
        for &(u, v) in pairs {
            for x in [u, v] {
                if x.index() >= n {
                    return Err(Error::IndexOutOfRange { index: x.index(), len: n });
                }
            }
            if u != v {
                directed.push((u, v));
                directed.push((v, u));
            }
        }
        directed.sort_unstable();
        directed.dedup();

        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in &directed {
            offsets[u.index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = directed.into_iter().map(|(_, v)| v).collect();
        Ok(Graph { offsets, targets, nodes })
    }

    /// Test and generator convenience: nodes named `"0"..n`.
    pub fn from_index_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let nodes = Interner::from_names((0..n).map(|i| i.to_string()))?;
        let pairs: Vec<_> = pairs
            .iter()
            .map(|&(u, v)| (NodeId::from(u), NodeId::from(v)))
            .collect();
        Self::from_pairs(nodes, &pairs)
    }

    /// Freezes a directed edge list. Nodes whose distinct out-degree in the
    /// raw input is below `min_degree` are dropped together with every edge
    /// touching them, before any symmetrization. With `symmetrize` each
    /// surviving directed edge becomes undirected; without it only
    /// reciprocated edges are kept.
    pub fn from_edge_list(list: &EdgeList, min_degree: usize, symmetrize: bool) -> Result<Self> {
        let out = list.out_adjacency(false);
        let keep: Vec<bool> = out.iter().map(|o| o.len() >= min_degree).collect();

        let mut remap = vec![u32::MAX; list.nodes.len()];
        let mut names = Interner::new();
        for (i, name) in list.nodes.names().iter().enumerate() {
            if keep[i] {
                remap[i] = names.intern(name).0;
            }
        }

        let mut pairs = Vec::new();
        for (s, targets) in out.iter().enumerate() {
            if !keep[s] {
                continue;
            }
            for &t in targets {
                if !keep[t.index()] {
                    continue;
                }
                if !symmetrize && out[t.index()].binary_search(&NodeId::from(s)).is_err() {
                    continue;
                }
                pairs.push((NodeId(remap[s]), NodeId(remap[t.index()])));
            }
        }
        Self::from_pairs(names, &pairs)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v.index() + 1] - self.offsets[v.index()]
    }

    /// Sorted neighbors of `v`.
    pub fn neighbors(&self, v: NodeId) -> Result<&[NodeId]> {
        if v.index() >= self.node_count() {
            return Err(Error::IndexOutOfRange {
                index: v.index(),
                len: self.node_count(),
            });
        }
        Ok(self.adj(v.index()))
    }

    /// Unchecked slice access for hot loops.
    #[inline]
    pub(crate) fn adj(&self, v: usize) -> &[NodeId] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn nodes(&self) -> &Interner {
        &self.nodes
    }

    pub fn name(&self, v: NodeId) -> &str {
        self.nodes.name(v)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.get(name)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count() as u32).map(NodeId)
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.node_ids().flat_map(move |u| {
            self.adj(u.index())
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        for (u, v) in self.edges() {
            writeln!(w, "{}\t{}", self.name(u), self.name(v)).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_node_mapping(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        for (i, name) in self.nodes.names().iter().enumerate() {
            writeln!(w, "{i}\t{name}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads an edge list and freezes it into an undirected graph.
pub fn load_edge_list(path: impl AsRef<Path>, min_degree: usize, symmetrize: bool) -> Result<Graph> {
    let list = EdgeList::read(path)?;
    Graph::from_edge_list(&list, min_degree, symmetrize)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
