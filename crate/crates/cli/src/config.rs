//! Flat `key = value` run configuration.
//!
//! Every key is optional at parse time; subcommands ask for the keys they
//! need and a missing one is reported as [`ConfigError::MissingKey`].

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub const SEED_ENV: &str = "SDE_REMLE_SEED";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },

    /// `line` is one past the last line of the input.
    #[error("line {line}: missing key `{key}`")]
    MissingKey { key: String, line: usize },

    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Seed,
    Counts,
    Text,
    Choice(&'static [&'static str]),
}

const KEYS: &[(&str, Kind)] = &[
    ("model", Kind::Choice(&remle_core::model::BUILTIN_MODELS)),
    ("mu0", Kind::Real),
    ("omega2_0", Kind::Real),
    ("mu1", Kind::Real),
    ("omega2_1", Kind::Real),
    ("mu_lo", Kind::Real),
    ("mu_hi", Kind::Real),
    ("omega2_lo", Kind::Real),
    ("omega2_hi", Kind::Real),
    ("design", Kind::Choice(&["iid", "converging"])),
    ("x0", Kind::Real),
    ("t_end", Kind::Real),
    ("x_inf", Kind::Real),
    ("a", Kind::Real),
    ("t_inf", Kind::Real),
    ("b", Kind::Real),
    ("dt", Kind::Real),
    ("n", Kind::Count),
    ("n_schedule", Kind::Counts),
    ("replicates", Kind::Count),
    ("info_replicates", Kind::Count),
    ("limit_replicates", Kind::Count),
    ("psi", Kind::Real),
    ("xi", Kind::Real),
    ("powers", Kind::Counts),
    ("m_schedule", Kind::Counts),
    ("seed", Kind::Seed),
    ("input", Kind::Text),
    ("output_dir", Kind::Text),
];

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Count(usize),
    Seed(u64),
    Counts(Vec<usize>),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x}"),
            Value::Count(n) => write!(f, "{n}"),
            Value::Seed(s) => write!(f, "{s}"),
            Value::Counts(v) => {
                let parts: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<&'static str, Value>,
    lines: BTreeMap<&'static str, usize>,
    end_line: usize,
}

/// Configs compare by value; source line numbers are ignored.
impl PartialEq for RunConfig {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut count = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        count = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::ParseError {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&(name, kind)) = KEYS.iter().find(|(k, _)| *k == key) else {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line,
            });
        };
        if let Some(first) = cfg.lines.get(name) {
            return Err(ConfigError::ParseError {
                line,
                message: format!("duplicate key `{key}` (first set on line {first})"),
            });
        }
        let parsed = parse_value(kind, value).map_err(|message| ConfigError::ParseError {
            line,
            message: format!("`{key}`: {message}"),
        })?;
        cfg.values.insert(name, parsed);
        cfg.lines.insert(name, line);
    }
    cfg.end_line = count + 1;
    Ok(cfg)
}

fn parse_value(kind: Kind, s: &str) -> Result<Value, String> {
    if s.is_empty() {
        return Err("empty value".into());
    }
    let count = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("expected a non-negative integer, found `{}`", t.trim()))
    };
    match kind {
        Kind::Real => {
            let x: f64 = s
                .parse()
                .map_err(|_| format!("expected a decimal number, found `{s}`"))?;
            if !x.is_finite() {
                return Err(format!("expected a finite number, found `{s}`"));
            }
            Ok(Value::Real(x))
        }
        Kind::Count => count(s).map(Value::Count),
        Kind::Seed => s
            .parse::<u64>()
            .map(Value::Seed)
            .map_err(|_| format!("expected an unsigned 64-bit integer, found `{s}`")),
        Kind::Counts => s
            .split(',')
            .map(count)
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Counts),
        Kind::Text => Ok(Value::Text(s.to_string())),
        Kind::Choice(options) => {
            if options.contains(&s) {
                Ok(Value::Text(s.to_string()))
            } else {
                Err(format!(
                    "expected one of {}, found `{s}`",
                    options.join(", ")
                ))
            }
        }
    }
}

impl RunConfig {
    /// Canonical text: one `key = value` per set key, in table order.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            if let Some(v) = self.values.get(key) {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Line on which `key` was set, if it came from parsed text.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    /// Sets or replaces a value, as when a flag overrides the file.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        let Some(&(name, _)) = KEYS.iter().find(|(k, _)| *k == key) else {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line: 0,
            });
        };
        self.values.insert(name, value);
        Ok(())
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
        self.lines.remove(key);
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::MissingKey {
            key: key.to_string(),
            line: self.end_line.max(1),
        }
    }

    fn require(&self, key: &str) -> Result<&Value, ConfigError> {
        self.values.get(key).ok_or_else(|| self.missing(key))
    }

    pub fn real(&self, key: &str) -> Result<f64, ConfigError> {
        match self.require(key)? {
            Value::Real(x) => Ok(*x),
            v => Err(self.type_error(key, v)),
        }
    }

    pub fn count(&self, key: &str) -> Result<usize, ConfigError> {
        match self.require(key)? {
            Value::Count(n) => Ok(*n),
            v => Err(self.type_error(key, v)),
        }
    }

    pub fn counts(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        match self.require(key)? {
            Value::Counts(v) => Ok(v.clone()),
            v => Err(self.type_error(key, v)),
        }
    }

    pub fn text(&self, key: &str) -> Result<&str, ConfigError> {
        match self.require(key)? {
            Value::Text(s) => Ok(s),
            v => Err(self.type_error(key, v)),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.values.get("seed") {
            Some(Value::Seed(s)) => Some(*s),
            _ => None,
        }
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        if self.contains(key) {
            self.count(key)
        } else {
            Ok(default)
        }
    }

    fn type_error(&self, key: &str, v: &Value) -> ConfigError {
        ConfigError::ParseError {
            line: self.line_of(key).unwrap_or(0),
            message: format!("`{key}` has the wrong type (`{v}`)"),
        }
    }
}

/// Seed precedence: flag, then config file, then `SDE_REMLE_SEED`, then 0.
pub fn resolve_seed(
    flag: Option<u64>,
    cfg: &RunConfig,
    env: Option<&str>,
) -> Result<u64, ConfigError> {
    if let Some(s) = flag.or(cfg.seed()) {
        return Ok(s);
    }
    match env {
        Some(text) => text.trim().parse().map_err(|_| ConfigError::ParseError {
            line: 0,
            message: format!("{SEED_ENV} is not an unsigned integer: `{text}`"),
        }),
        None => Ok(0),
    }
}
