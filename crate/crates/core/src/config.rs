//! `key = value` configuration files: one pair per line, `#` comments,
//! surrounding whitespace ignored, duplicate keys rejected.

use indexmap::IndexMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value")]
    MissingEquals { line: usize },
    #[error("line {line}: empty key")]
    EmptyKey { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(IndexMap<String, String>);

pub fn parse_key_values(text: &str) -> Result<KeyValues, ConfigError> {
    let mut map = IndexMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed.split_once('=').ok_or(ConfigError::MissingEquals { line })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError::EmptyKey { line });
        }
        if map.insert(key.to_owned(), v.trim().to_owned()).is_some() {
            return Err(ConfigError::DuplicateKey { line, key: key.to_owned() });
        }
    }
    Ok(KeyValues(map))
}

impl KeyValues {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|v| v.parse::<T>().map_err(|e| ConfigError::BadValue { key: key.to_owned(), reason: e.to_string() })).transpose()
    }

    /// Fail on the first key not in `allowed`.
    pub fn expect_only(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.to_owned())),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let kv = parse_key_values("# feed\ninterval_minutes = 30\n\n bind=127.0.0.1:8080 \nprompt = a = b\n").unwrap();
        assert_eq!(kv.get("interval_minutes"), Some("30"));
        assert_eq!(kv.get("bind"), Some("127.0.0.1:8080"));
        assert_eq!(kv.get("prompt"), Some("a = b"));
        assert_eq!(kv.parse::<u32>("interval_minutes").unwrap(), Some(30));
        assert_eq!(kv.parse::<u32>("missing").unwrap(), None);
        assert!(kv.parse::<u32>("bind").is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert_eq!(parse_key_values("a=1\nnonsense"), Err(ConfigError::MissingEquals { line: 2 }));
        assert_eq!(parse_key_values(" = 3"), Err(ConfigError::EmptyKey { line: 1 }));
        assert!(matches!(parse_key_values("a=1\na=2"), Err(ConfigError::DuplicateKey { line: 2, .. })));
        let kv = parse_key_values("a=1\nb=2").unwrap();
        assert_eq!(kv.expect_only(&["a"]), Err(ConfigError::UnknownKey("b".into())));
    }
}
