//! Plain-text `key = value` configuration files. Flags override file
//! values; file keys that no resolution step consulted are rejected so
//! typos fail loudly instead of being ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub struct Kv {
    origin: String,
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Kv {
    /// Loads `path`, or an empty table when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                origin: String::new(),
                values: BTreeMap::new(),
                used: RefCell::new(BTreeSet::new()),
            });
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{} line {}: expected key = value, got {raw:?}",
                    path.display(),
                    index + 1
                );
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                bail!("{} line {}: empty key", path.display(), index + 1);
            }
            if values.insert(key.clone(), value).is_some() {
                bail!("{} line {}: duplicate key {key}", path.display(), index + 1);
            }
        }
        Ok(Self {
            origin: path.display().to_string(),
            values,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// Flag value if present, else the parsed file value under `key`.
    pub fn or_file<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(value) => Ok(Some(value)),
                Err(err) => bail!("{}: key {key}: {err} (value {raw:?})", self.origin),
            },
        }
    }

    /// Like [`Kv::or_file`] with a final default.
    pub fn or_default<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.or_file(flag, key)?.unwrap_or(default))
    }

    /// Boolean switch: a set flag wins; otherwise the file value.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(self.or_file(if flag { Some(true) } else { None }, key)?.unwrap_or(false))
    }

    /// Errors on file keys that no resolution step consulted.
    pub fn reject_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !used.contains(*k))
            .map(|k| k.as_str())
            .collect();
        if !unknown.is_empty() {
            bail!("{}: unknown keys: {}", self.origin, unknown.join(", "));
        }
        Ok(())
    }
}

/// Parses a comma-separated list, rejecting empty entries.
pub fn parse_list<T>(text: &str, what: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    text.split(',')
        .map(|part| {
            let part = part.trim();
            if part.is_empty() {
                bail!("{what}: empty entry in list {text:?}");
            }
            part.parse()
                .map_err(|err| anyhow::anyhow!("{what}: {err} (value {part:?})"))
        })
        .collect()
}
