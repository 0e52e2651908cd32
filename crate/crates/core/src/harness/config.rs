//! Flat `key = value` settings. Keys are the CLI flag names without the
//! leading dashes; `#` starts a comment. Later assignments win.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Settings::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("config line {}: expected key=value", lineno + 1)))?;
            let key = normalize(k.trim());
            if key.is_empty() {
                return Err(Error::InvalidParameter(format!("config line {}: empty key", lineno + 1)));
            }
            out.values.insert(key, v.trim().to_string());
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize(key), value.into());
    }

    /// Copies every entry of `other` over this one.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::InvalidParameter(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma separated list.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|e| Error::InvalidParameter(format!("{key}: {s:?}: {e}")))
                    })
                    .collect::<Result<Vec<T>>>()
            })
            .transpose()
    }
}

fn normalize(key: &str) -> String {
    key.trim_start_matches('-').replace('-', "_").to_ascii_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let s = Settings::parse("# header\nn = 100\n--alpha0=1, 2,4 # trailing\n\nbaseline-alpha=0.5\nn=7\n").unwrap();
        assert_eq!(s.get::<usize>("n").unwrap(), Some(7));
        assert_eq!(s.list::<f64>("alpha0").unwrap(), Some(vec![1.0, 2.0, 4.0]));
        assert_eq!(s.get::<f64>("baseline_alpha").unwrap(), Some(0.5));
        assert_eq!(s.get::<f64>("missing").unwrap(), None);
        assert!(s.get::<usize>("alpha0").is_err());
    }

    #[test]
    fn rejects_bare_words() {
        assert!(Settings::parse("n 100").is_err());
        assert!(Settings::parse("=3").is_err());
    }

    #[test]
    fn overlay_wins() {
        let mut a = Settings::parse("n=1\nd=2").unwrap();
        let mut b = Settings::new();
        b.set("--n", "5");
        a.overlay(&b);
        assert_eq!(a.get::<usize>("n").unwrap(), Some(5));
        assert_eq!(a.get::<usize>("d").unwrap(), Some(2));
    }
}
