//! Flat `key = value` config files. `#` starts a comment line; keys are
//! unique; unknown keys are rejected by [`KvMap::finish`].

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
}

#[derive(Debug, Default)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(KvError::Syntax { line: i + 1 });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(KvError::Duplicate {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Removes and parses `key`, leaving `slot` untouched when absent.
    pub fn take<T>(&mut self, key: &str, slot: &mut T) -> Result<(), KvError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(value) = self.entries.remove(key) {
            *slot = value.parse().map_err(|e: T::Err| KvError::BadValue {
                key: key.to_string(),
                value: value.clone(),
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Errors on the first key nobody consumed.
    pub fn finish(self) -> Result<(), KvError> {
        match self.entries.into_keys().next() {
            Some(k) => Err(KvError::Unknown(k)),
            None => Ok(()),
        }
    }
}

/// Renders `key = value` lines in the given order.
pub fn render(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_leftovers() {
        let mut m = KvMap::parse("# c\na = 3\n\nb=x y\n").unwrap();
        let mut a = 0u32;
        m.take("a", &mut a).unwrap();
        assert_eq!(a, 3);
        assert_eq!(m.finish(), Err(KvError::Unknown("b".into())));
    }

    #[test]
    fn syntax_and_duplicates() {
        assert_eq!(KvMap::parse("nope").unwrap_err(), KvError::Syntax { line: 1 });
        assert!(matches!(KvMap::parse("a=1\na=2"), Err(KvError::Duplicate { line: 2, .. })));
    }

    #[test]
    fn bad_value_reports_key() {
        let mut m = KvMap::parse("sigma = abc").unwrap();
        let mut s = 1.0f64;
        assert!(matches!(m.take("sigma", &mut s), Err(KvError::BadValue { .. })));
    }
}
