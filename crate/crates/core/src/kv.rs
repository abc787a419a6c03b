//! Flat `key = value` text files: one key per line, `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    path: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

pub fn parse(text: &str, path: &Path) -> Result<KvMap> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, format!("expected key = value, got {raw:?}")))?;
        let k = k.trim().to_string();
        if k.is_empty() {
            return Err(Error::parse(path, i + 1, "empty key"));
        }
        if entries.insert(k.clone(), (v.trim().to_string(), i + 1)).is_some() {
            return Err(Error::parse(path, i + 1, format!("duplicate key {k:?}")));
        }
    }
    Ok(KvMap {
        path: path.to_path_buf(),
        entries,
    })
}

pub fn read(path: impl AsRef<Path>) -> Result<KvMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

impl KvMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            Error::Config(format!("{}: missing key {key:?}", self.path.display()))
        })
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                Error::parse(&self.path, *line, format!("cannot parse {key} = {v:?}"))
            }),
        }
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?;
        Ok(self.parse_opt(key)?.expect("present"))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
