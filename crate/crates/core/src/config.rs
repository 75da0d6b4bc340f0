//! Plain `key = value` configuration files. `#` starts a comment; blank lines
//! are ignored; later keys override earlier ones.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                // keep '#' inside values such as hashtags: only strip comments
                // that start a line or follow whitespace
                Some(0) => "",
                Some(pos) if raw[..pos].ends_with(char::is_whitespace) => &raw[..pos],
                _ => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            entries.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Source {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("cannot parse {key} = {v:?}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Entries whose key starts with `prefix`, with the prefix stripped.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.entries
            .iter()
            .filter_map(move |(k, v)| k.strip_prefix(prefix).map(|rest| (rest, v.as_str())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let kv = KeyValues::parse("# header\nq = 2\n\nmode=step # trailing\nq=4\ntag=#x\n").unwrap();
        assert_eq!(kv.get::<u32>("q").unwrap(), Some(4));
        assert_eq!(kv.raw("mode"), Some("step"));
        assert_eq!(kv.raw("tag"), Some("#x"));
        assert_eq!(kv.get::<u32>("missing").unwrap(), None);
    }

    #[test]
    fn rejects_lines_without_equals() {
        assert!(KeyValues::parse("just words").is_err());
    }

    #[test]
    fn bad_number_is_an_error() {
        let kv = KeyValues::parse("q=two").unwrap();
        assert!(kv.get::<u32>("q").is_err());
    }

    #[test]
    fn prefix_iteration() {
        let kv = KeyValues::parse("stream.a=x.tsv\nstream.b=y.tsv\ntau=60").unwrap();
        let got: Vec<_> = kv.with_prefix("stream.").collect();
        assert_eq!(got, vec![("a", "x.tsv"), ("b", "y.tsv")]);
    }
}
