use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::create;
use crate::labels::fmt_real;

/// One named feature file keyed by external node name.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBlock {
    pub name: String,
    pub columns: Vec<String>,
    pub nodes: Vec<String>,
    /// Row-major, `nodes.len() * columns.len()`.
    pub data: Vec<f64>,
}

impl FeatureBlock {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Self {
        FeatureBlock {
            name: name.into(),
            columns,
            nodes: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn push_row(&mut self, node: impl Into<String>, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len());
        self.nodes.push(node.into());
        self.data.extend_from_slice(row);
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width()..(i + 1) * self.width()]
    }

    /// Reads `node,<col>..` CSV; the block is named after the file stem.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "features".into());
        Self::parse_csv(&text, name, &path.display().to_string())
    }

    pub fn parse_csv(text: &str, name: impl Into<String>, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_owned(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let mut cols = header.split(',').map(str::trim);
        if cols.next() != Some("node") {
            return Err(err(1, "first column must be `node`".into()));
        }
        let mut block = FeatureBlock::new(name, cols.map(String::from).collect());
        let mut seen = HashMap::new();
        let mut row = Vec::with_capacity(block.width());
        for (i, line) in lines {
            let mut fields = line.split(',').map(str::trim);
            let node = fields.next().unwrap_or_default();
            row.clear();
            for f in fields {
                row.push(f.parse::<f64>().map_err(|_| err(i + 1, format!("bad value {f:?}")))?);
            }
            if row.len() != block.width() {
                return Err(err(i + 1, format!("expected {} values, got {}", block.width(), row.len())));
            }
            if seen.insert(node.to_owned(), ()).is_some() {
                return Err(err(i + 1, format!("duplicate node {node:?}")));
            }
            block.push_row(node, &row);
        }
        Ok(block)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "node,{}", self.columns.join(",")).map_err(io)?;
        for (i, node) in self.nodes.iter().enumerate() {
            let vals: Vec<String> = self.row(i).iter().map(|&x| fmt_real(x)).collect();
            writeln!(w, "{node},{}", vals.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Row-aligned concatenation of feature blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    nodes: Vec<String>,
    columns: Vec<String>,
    blocks: Vec<(String, Range<usize>)>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// A single anonymous block from dense rows.
    pub fn from_rows(columns: Vec<String>, nodes: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let width = columns.len();
        if rows.len() != nodes.len() {
            return Err(Error::Shape {
                expected: nodes.len(),
                found: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            if r.len() != width {
                return Err(Error::Shape {
                    expected: width,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            nodes,
            blocks: vec![("x".into(), 0..width)],
            columns,
            data,
        })
    }

    /// Unnamed rows; nodes are numbered.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let columns = (0..width).map(|i| format!("x{i}")).collect();
        let nodes = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::from_rows(columns, nodes, rows)
    }

    pub fn rows(&self) -> usize {
        self.nodes.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Block names with their column ranges.
    pub fn blocks(&self) -> &[(String, Range<usize>)] {
        &self.blocks
    }

    /// New matrix holding rows `idx` in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.width());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            nodes: idx.iter().map(|&i| self.nodes[i].clone()).collect(),
            columns: self.columns.clone(),
            blocks: self.blocks.clone(),
            data,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct JoinReport {
    /// Rows of each block that did not survive the join.
    pub dropped: Vec<(String, usize)>,
}

/// Inner join of `blocks` on node name. Rows follow `nodes` when given
/// (restricted to names present in every block), otherwise the first block.
/// Columns are prefixed `<block>.`.
pub fn join_features(blocks: &[FeatureBlock], nodes: Option<&[String]>) -> Result<(FeatureMatrix, JoinReport)> {
    let Some(first) = blocks.first() else {
        return Err(Error::Join("no feature blocks given".into()));
    };
    let index: Vec<HashMap<&str, usize>> = blocks
        .iter()
        .map(|b| b.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect())
        .collect();
    let candidates: Vec<&str> = match nodes {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => first.nodes.iter().map(String::as_str).collect(),
    };
    let kept: Vec<&str> = candidates
        .into_iter()
        .filter(|n| index.iter().all(|ix| ix.contains_key(n)))
        .collect();
    if kept.is_empty() {
        return Err(Error::Join("no node is present in every block".into()));
    }

    let mut columns = Vec::new();
    let mut ranges = Vec::new();
    for b in blocks {
        let start = columns.len();
        columns.extend(b.columns.iter().map(|c| format!("{}.{c}", b.name)));
        ranges.push((b.name.clone(), start..columns.len()));
    }
    let mut data = Vec::with_capacity(kept.len() * columns.len());
    for n in &kept {
        for (b, ix) in blocks.iter().zip(&index) {
            data.extend_from_slice(b.row(ix[n]));
        }
    }
    let report = JoinReport {
        dropped: blocks
            .iter()
            .map(|b| (b.name.clone(), b.nodes.len() - kept.len()))
            .collect(),
    };
    Ok((
        FeatureMatrix {
            nodes: kept.into_iter().map(String::from).collect(),
            columns,
            blocks: ranges,
            data,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(name: &str, rows: &[(&str, f64)]) -> FeatureBlock {
        let mut b = FeatureBlock::new(name, vec!["v".into()]);
        for (n, x) in rows {
            b.push_row(*n, &[*x]);
        }
        b
    }

    #[test]
    fn identical_keys_join_fully() {
        let a = block("a", &[("x", 1.0), ("y", 2.0)]);
        let b = block("b", &[("y", 20.0), ("x", 10.0)]);
        let (m, report) = join_features(&[a, b], None).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.row(0), &[1.0, 10.0]);
        assert_eq!(m.columns(), ["a.v", "b.v"]);
        assert_eq!(report.dropped, vec![("a".into(), 0), ("b".into(), 0)]);
    }

    #[test]
    fn disjoint_keys_fail() {
        let a = block("a", &[("x", 1.0)]);
        let b = block("b", &[("y", 1.0)]);
        assert!(matches!(join_features(&[a, b], None), Err(Error::Join(_))));
    }

    #[test]
    fn single_overlap_gives_one_row() {
        let a = block("a", &[("x", 1.0), ("y", 2.0)]);
        let b = block("b", &[("y", 3.0), ("z", 4.0)]);
        let (m, report) = join_features(&[a, b], None).unwrap();
        assert_eq!(m.nodes(), ["y"]);
        assert_eq!(m.row(0), &[2.0, 3.0]);
        assert_eq!(report.dropped, vec![("a".into(), 1), ("b".into(), 1)]);
    }

    #[test]
    fn node_list_orders_and_filters() {
        let a = block("a", &[("x", 1.0), ("y", 2.0), ("z", 3.0)]);
        let order = vec!["z".to_string(), "w".to_string(), "x".to_string()];
        let (m, _) = join_features(&[a], Some(&order)).unwrap();
        assert_eq!(m.nodes(), ["z", "x"]);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let b = FeatureBlock::parse_csv("node,f0,f1\na,1,2.5\nb,-1,0\n", "cumf", "m").unwrap();
        assert_eq!(b.row(1), &[-1.0, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cumf.csv");
        b.write_csv(&p).unwrap();
        assert_eq!(FeatureBlock::read_csv(&p).unwrap(), b);

        assert!(FeatureBlock::parse_csv("id,f0\n", "x", "m").is_err());
        assert!(matches!(
            FeatureBlock::parse_csv("node,f0\na,1,2\n", "x", "m"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(FeatureBlock::parse_csv("node,f0\na,1\na,2\n", "x", "m").is_err());
    }
}
