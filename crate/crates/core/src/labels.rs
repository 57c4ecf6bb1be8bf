//! Label files: `<external-name><TAB><value>` per line.
//!
//! Binary files hold the probability of the positive class (female = 1).
//! Class files hold a bucket index, or a raw age converted with
//! [`age_bucket`].

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{create, Graph, NodeId};
use crate::labelprop::{age_bucket, LabelState};

/// How the value column of a label file is read.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LabelFormat {
    /// Reals in [0,1].
    Binary,
    /// Class index in `[0, classes)`.
    Class { classes: usize },
    /// Raw age in years, bucketed.
    Age,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelEntry {
    pub name: String,
    pub value: f64,
}

/// Reads a label file. Class and age values come back as the class index.
pub fn read_labels(path: impl AsRef<Path>, format: LabelFormat) -> Result<Vec<LabelEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, format, &path.display().to_string())
}

pub fn parse_labels(text: &str, format: LabelFormat, source: &str) -> Result<Vec<LabelEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: source.to_owned(),
            line: i + 1,
            message,
        };
        let mut fields = trimmed.split_whitespace();
        let (Some(name), Some(raw), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(err(format!("expected `<name>\\t<value>`, got {trimmed:?}")));
        };
        let value = match format {
            LabelFormat::Binary => {
                let y: f64 = raw.parse().map_err(|_| err(format!("bad label {raw:?}")))?;
                if !(0.0..=1.0).contains(&y) {
                    return Err(err(format!("binary label {y} outside [0,1]")));
                }
                y
            }
            LabelFormat::Class { classes } => {
                let c: usize = raw.parse().map_err(|_| err(format!("bad class index {raw:?}")))?;
                if c >= classes {
                    return Err(err(format!("class {c} outside [0,{classes})")));
                }
                c as f64
            }
            LabelFormat::Age => {
                let age: i64 = raw.parse().map_err(|_| err(format!("bad age {raw:?}")))?;
                age_bucket(age).map_err(|e| err(e.to_string()))? as f64
            }
        };
        out.push(LabelEntry {
            name: name.to_owned(),
            value,
        });
    }
    Ok(out)
}

/// Resolves labeled names against the graph. Returns the matched pairs and
/// the number of names absent from the graph.
pub fn resolve(g: &Graph, entries: &[LabelEntry]) -> (Vec<(NodeId, f64)>, usize) {
    let mut found = Vec::with_capacity(entries.len());
    let mut missing = 0;
    for e in entries {
        match g.node_id(&e.name) {
            Some(v) => found.push((v, e.value)),
            None => missing += 1,
        }
    }
    (found, missing)
}

/// Seed state for the graph: scalar when `classes` is 1, one-hot otherwise.
pub fn seed_state(g: &Graph, entries: &[LabelEntry], classes: usize) -> Result<LabelState> {
    let (found, _) = resolve(g, entries);
    if classes <= 1 {
        LabelState::binary(g.node_count(), &found)
    } else {
        let seeds: Vec<_> = found.iter().map(|&(v, c)| (v, c as usize)).collect();
        LabelState::one_hot(g.node_count(), classes, &seeds)
    }
}

/// Turns labels into class indices. Binary labels must be exactly 0 or 1.
pub fn class_indices(entries: &[LabelEntry], format: LabelFormat) -> Result<Vec<usize>> {
    entries
        .iter()
        .map(|e| match format {
            LabelFormat::Binary if e.value == 0.0 || e.value == 1.0 => Ok(e.value as usize),
            LabelFormat::Binary => Err(Error::validation(format!(
                "label {} for {} is not a class (expected 0 or 1)",
                e.value, e.name
            ))),
            _ => Ok(e.value as usize),
        })
        .collect()
}

/// Seventeen significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `<name>\t<v0>[,v1..]` for active nodes. With `inactive_sentinel`
/// inactive nodes are written with that token instead of being skipped.
pub fn write_label_state(
    path: impl AsRef<Path>,
    g: &Graph,
    state: &LabelState,
    inactive_sentinel: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for v in g.node_ids() {
        let line = match (state.get(v), inactive_sentinel) {
            (Some(row), _) => row.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(","),
            (None, Some(s)) => s.to_owned(),
            (None, None) => continue,
        };
        writeln!(w, "{}\t{}", g.name(v), line).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_format() {
        let b = parse_labels("a\t1\nb\t0.25\n# c\n", LabelFormat::Binary, "m").unwrap();
        assert_eq!(b[1].value, 0.25);
        let c = parse_labels("a\t6\n", LabelFormat::Class { classes: 7 }, "m").unwrap();
        assert_eq!(c[0].value, 6.0);
        let a = parse_labels("a\t30\nb\t17\n", LabelFormat::Age, "m").unwrap();
        assert_eq!((a[0].value, a[1].value), (2.0, 0.0));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            parse_labels("a\t1.5\n", LabelFormat::Binary, "m"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_labels("a\t1\nb\t7\n", LabelFormat::Class { classes: 7 }, "m"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_labels("a\n", LabelFormat::Binary, "m").is_err());
        assert!(parse_labels("a\t-3\n", LabelFormat::Age, "m").is_err());
    }

    #[test]
    fn real_formatting_has_seventeen_digits() {
        assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn binary_classes_must_be_integral() {
        let e = parse_labels("a\t0.5\n", LabelFormat::Binary, "m").unwrap();
        assert!(class_indices(&e, LabelFormat::Binary).is_err());
    }
}
