//! Flat `key = value` configuration files.
//!
//! Keys mirror the long flag names (`v`, `r`, `d`, `rho`, `format`, `seed`,
//! `tol`, `mechanism`, `param`, `from`, `to`, `steps`, `skip-infeasible`,
//! `samples`, `mc-samples`, `grid-n`, `oracle-tol`, `out`). Blank lines and
//! lines starting with `#` are ignored. A flag given on the command line
//! always wins over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

const KNOWN_KEYS: [&str; 18] = [
    "v",
    "r",
    "d",
    "rho",
    "format",
    "seed",
    "tol",
    "mechanism",
    "param",
    "from",
    "to",
    "steps",
    "skip-infeasible",
    "samples",
    "mc-samples",
    "grid-n",
    "oracle-tol",
    "out",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", n + 1));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key `{key}`", n + 1));
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|s| s.parse::<T>().map_err(|e| format!("config key `{key}`: invalid value `{s}`: {e}")))
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, String> {
        match self.raw(key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(other) => Err(format!("config key `{key}`: expected true or false, got `{other}`")),
        }
    }
}
