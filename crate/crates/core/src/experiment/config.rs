use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Flat `key = value` settings. Blank lines and lines starting with `#` are
/// ignored; a repeated key keeps its last value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: source.to_owned(),
                    line: i + 1,
                    message: format!("expected `key = value`, got {line:?}"),
                });
            };
            kv.set(key.trim(), value.trim());
        }
        Ok(kv)
    }

    /// Adds or replaces a key; used for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_owned(), value.to_owned());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Parses `value` for `key`, reporting the key on failure.
pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("cannot parse {key} = {value:?}")))
}

pub(crate) fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("{key} expects true or false, got {value:?}"))),
    }
}

pub(crate) fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut kv = KeyValues::parse("# comment\nedges = a.tsv\n\nlp.alpha=0.3\nlp.alpha = 0.4\n", "cfg").unwrap();
        assert_eq!(kv.get("edges"), Some("a.tsv"));
        assert_eq!(kv.get("lp.alpha"), Some("0.4"));
        kv.set("edges", "b.tsv");
        assert_eq!(kv.get("edges"), Some("b.tsv"));
        assert_eq!(kv.iter().count(), 2);
    }

    #[test]
    fn malformed_line() {
        let err = KeyValues::parse("a = 1\nnot a pair\n", "cfg").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn value_helpers() {
        assert_eq!(parse_list::<usize>("h", "256, 256,8").unwrap(), vec![256, 256, 8]);
        assert!(parse_bool("b", "maybe").is_err());
        assert!(parse_value::<f64>("x", "abc").is_err());
    }
}
