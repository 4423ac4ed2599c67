//! Flat key/value text encodings shared by the event log and the
//! configuration files.
//!
//! Values are percent-encoded so that a value never contains a space, `=`,
//! `%` or a line break. Log records put `key=value` pairs on one line
//! separated by single spaces; configuration files put one `key = value` pair
//! per line.

use std::str::FromStr;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use thiserror::Error;

const VALUE_ESCAPES: &AsciiSet = &CONTROLS.add(b' ').add(b'%').add(b'=').add(b'#');

pub fn encode_value(raw: &str) -> String {
    utf8_percent_encode(raw, VALUE_ESCAPES).to_string()
}

pub fn decode_value(encoded: &str) -> Result<String, KvError> {
    percent_decode_str(encoded)
        .decode_utf8()
        .map(|c| c.into_owned())
        .map_err(|_| KvError::BadEncoding(encoded.to_string()))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("value is not valid percent-encoded UTF-8: {0:?}")]
    BadEncoding(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

/// An ordered list of decoded key/value pairs. Keys may repeat.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: Vec<(String, String)>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Last value for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    /// Parses the last value for `key`, if present.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.trim().parse().map(Some).map_err(|_| KvError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, KvError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    /// Errors on the first key not in `known`; a trailing `*` in `known` matches by prefix.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<(), KvError> {
        for (k, _) in &self.entries {
            let ok = known.iter().any(|n| {
                if let Some(prefix) = n.strip_suffix('*') {
                    k.starts_with(prefix)
                } else {
                    k == n
                }
            });
            if !ok {
                return Err(KvError::Unknown(k.clone()));
            }
        }
        Ok(())
    }
}

/// Parses a configuration file: one `key = value` per line, `#` starts a
/// comment line, blank lines ignored. Values are percent-decoded; surrounding
/// whitespace is trimmed.
pub fn parse_config(text: &str) -> Result<KvMap, KvError> {
    let mut map = KvMap::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() || k.contains(' ') {
            return Err(KvError::Syntax { line: i + 1 });
        }
        map.push(k, decode_value(v.trim())?);
    }
    Ok(map)
}

pub fn format_config(map: &KvMap) -> String {
    map.entries
        .iter()
        .map(|(k, v)| format!("{k} = {}\n", encode_value(v)))
        .collect()
}
