//! `key=value` text files: frame sidecars, camera profiles and config echoes.
//! Blank lines and everything after `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(path, format!("line {}: expected key=value", n + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::format(path, format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::format(path, format!("line {}: duplicate key {key}", n + 1)));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str, path: &Path) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::format(path, format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        self.get_parsed(key, path)?.ok_or_else(|| Error::format(path, format!("missing key {key}")))
    }
}

/// Ordered writer counterpart of [`KeyValues`].
#[derive(Debug, Clone, Default)]
pub struct KeyValueWriter {
    text: String,
}

impl KeyValueWriter {
    pub fn comment(&mut self, line: &str) -> &mut Self {
        let _ = writeln!(self.text, "# {line}");
        self
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.text, "{key}={value}");
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text).map_err(|e| Error::io(path, e))
    }
}
