//! Flat `key = value` configuration documents.
//!
//! This one format backs the optional config file accepted by the command
//! line, the resolved-config provenance file written next to every output
//! artifact, and the config blob embedded in checkpoints. Keys are unique;
//! `#` starts a comment; values keep internal whitespace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered key-value document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Kv {
    map: BTreeMap<String, String>,
}

impl Kv {
    pub fn new() -> Kv {
        Kv::default()
    }

    pub fn parse(text: &str) -> std::result::Result<Kv, String> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value'", lineno + 1))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(format!("line {}: empty key", lineno + 1));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key '{key}'", lineno + 1));
            }
        }
        Ok(Kv { map })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn read_file(path: &Path) -> Result<Kv> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Kv::parse(&text).map_err(|detail| Error::parse(path, detail))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Required string value.
    pub fn str(&self, key: &str) -> std::result::Result<&str, String> {
        self.get(key).ok_or_else(|| format!("missing key '{key}'"))
    }

    pub fn parse_as<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, String> {
        self.str(key)?
            .parse::<T>()
            .map_err(|_| format!("key '{key}': cannot parse '{}'", self.get(key).unwrap()))
    }

    /// Typed value with a default when the key is absent.
    pub fn parse_or<T: std::str::FromStr>(
        &self,
        key: &str,
        default: T,
    ) -> std::result::Result<T, String> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.parse_as(key),
        }
    }

    /// Overlay `other` on top of `self` (other wins on conflicts).
    pub fn overlaid_with(&self, other: &Kv) -> Kv {
        let mut map = self.map.clone();
        for (k, v) in &other.map {
            map.insert(k.clone(), v.clone());
        }
        Kv { map }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
