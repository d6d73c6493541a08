//! Layered run configuration: defaults < config file < environment < flags.
//!
//! Every subcommand declares its parameters up front as flat dotted keys
//! (`"distill.outer_epochs"`). A JSON config file may set any declared key
//! and nothing else — unknown keys are rejected so typos fail loudly.
//! Environment variables override the file (`TABDISTILL_DISTILL_OUTER_EPOCHS=10`),
//! and explicit command-line flags override everything. The fully resolved
//! map is echoed into the output directory as `<command>.config.json` so a
//! run can always be reproduced from its artifacts alone.

use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use tabdistill::{Error, Result};

pub const ENV_PREFIX: &str = "TABDISTILL_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Non-negative integer (counts, sizes, seeds).
    Int,
    Float,
    Bool,
    Str,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Int => "a non-negative integer",
            Kind::Float => "a number",
            Kind::Bool => "a boolean",
            Kind::Str => "a string",
        }
    }
}

/// A subcommand's declared keys with their current (layered) values.
pub struct Resolved {
    command: &'static str,
    kinds: BTreeMap<String, Kind>,
    values: BTreeMap<String, Value>,
}

impl Resolved {
    /// Starts a registry with the keys shared by every subcommand.
    pub fn new(command: &'static str) -> Self {
        let mut r = Resolved {
            command,
            kinds: BTreeMap::new(),
            values: BTreeMap::new(),
        };
        r.string("out", "out");
        r.int("seed", 0);
        r.int("jobs", 0);
        r.boolean("strict_serial", false);
        r
    }

    pub fn int(&mut self, key: &str, default: u64) {
        self.declare(key, Kind::Int, Value::from(default));
    }

    pub fn float(&mut self, key: &str, default: f64) {
        self.declare(key, Kind::Float, Value::from(default));
    }

    pub fn boolean(&mut self, key: &str, default: bool) {
        self.declare(key, Kind::Bool, Value::from(default));
    }

    pub fn string(&mut self, key: &str, default: &str) {
        self.declare(key, Kind::Str, Value::from(default));
    }

    fn declare(&mut self, key: &str, kind: Kind, default: Value) {
        let prev = self.kinds.insert(key.to_string(), kind);
        assert!(prev.is_none(), "config key `{key}` declared twice");
        self.values.insert(key.to_string(), default);
    }

    /// Applies a JSON config file. Every key must be declared and well-typed.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{} is not valid JSON: {e}", path.display())))?;
        let Value::Object(map) = doc else {
            return Err(Error::InvalidConfig(format!(
                "{} must be a JSON object of flat dotted keys",
                path.display()
            )));
        };
        let source = format!("config file {}", path.display());
        for (key, value) in map {
            self.set_json(&key, value, &source)?;
        }
        Ok(())
    }

    /// Applies `TABDISTILL_*` environment overrides for declared keys.
    pub fn load_env(&mut self) -> Result<()> {
        let keys: Vec<String> = self.kinds.keys().cloned().collect();
        for key in keys {
            let var = env_var_name(&key);
            let Ok(raw) = std::env::var(&var) else { continue };
            let kind = self.kinds[&key];
            let value = parse_text(&raw, kind).ok_or_else(|| {
                Error::InvalidConfig(format!("{var}={raw} is not {}", kind.name()))
            })?;
            self.values.insert(key, value);
        }
        Ok(())
    }

    fn set_json(&mut self, key: &str, value: Value, source: &str) -> Result<()> {
        let Some(&kind) = self.kinds.get(key) else {
            return Err(Error::InvalidConfig(format!(
                "unknown config key `{key}` in {source}"
            )));
        };
        let ok = match (kind, &value) {
            (Kind::Int, Value::Number(n)) => n.as_u64().is_some(),
            (Kind::Float, Value::Number(_)) => true,
            (Kind::Bool, Value::Bool(_)) => true,
            (Kind::Str, Value::String(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "config key `{key}` expects {}, got {value} in {source}",
                kind.name()
            )));
        }
        // Normalize integral floats so `5` and `5.0` resolve identically.
        let value = match (kind, &value) {
            (Kind::Float, Value::Number(n)) => Value::from(n.as_f64().unwrap()),
            _ => value,
        };
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    // Flag overrides: `None` means "flag not given, keep the current value".

    pub fn flag_int(&mut self, key: &str, v: Option<u64>) {
        if let Some(v) = v {
            self.check(key, Kind::Int);
            self.values.insert(key.to_string(), Value::from(v));
        }
    }

    pub fn flag_usize(&mut self, key: &str, v: Option<usize>) {
        self.flag_int(key, v.map(|v| v as u64));
    }

    pub fn flag_f64(&mut self, key: &str, v: Option<f64>) {
        if let Some(v) = v {
            self.check(key, Kind::Float);
            self.values.insert(key.to_string(), Value::from(v));
        }
    }

    pub fn flag_bool(&mut self, key: &str, v: Option<bool>) {
        if let Some(v) = v {
            self.check(key, Kind::Bool);
            self.values.insert(key.to_string(), Value::from(v));
        }
    }

    /// For presence-only flags (`--strict-serial`): sets true when given.
    pub fn flag_true(&mut self, key: &str, present: bool) {
        if present {
            self.check(key, Kind::Bool);
            self.values.insert(key.to_string(), Value::from(true));
        }
    }

    pub fn flag_str(&mut self, key: &str, v: Option<&str>) {
        if let Some(v) = v {
            self.check(key, Kind::Str);
            self.values.insert(key.to_string(), Value::from(v));
        }
    }

    fn check(&self, key: &str, kind: Kind) {
        assert_eq!(self.kinds.get(key), Some(&kind), "flag for undeclared key `{key}`");
    }

    // Typed getters. Missing keys are programmer errors, hence panics;
    // the integer getters validate range because JSON cannot.

    pub fn u64(&self, key: &str) -> Result<u64> {
        match &self.values[key] {
            Value::Number(n) => n.as_u64().ok_or_else(|| {
                Error::InvalidConfig(format!("`{key}` must be a non-negative integer"))
            }),
            _ => unreachable!("`{key}` is not an integer key"),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        usize::try_from(self.u64(key)?)
            .map_err(|_| Error::InvalidConfig(format!("`{key}` is too large")))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.values[key].as_f64().expect("float key")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.values[key].as_bool().expect("bool key")
    }

    pub fn str(&self, key: &str) -> &str {
        self.values[key].as_str().expect("string key")
    }

    /// Creates the output directory and writes the resolved-config echo.
    pub fn prepare_out(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(self.str("out"));
        std::fs::create_dir_all(&dir)?;
        let echo = serde_json::to_string_pretty(&self.values)? + "\n";
        std::fs::write(dir.join(format!("{}.config.json", self.command)), echo)?;
        Ok(dir)
    }
}

fn env_var_name(key: &str) -> String {
    let mut name = String::from(ENV_PREFIX);
    for ch in key.chars() {
        name.push(if ch == '.' { '_' } else { ch.to_ascii_uppercase() });
    }
    name
}

fn parse_text(raw: &str, kind: Kind) -> Option<Value> {
    match kind {
        Kind::Int => raw.trim().parse::<u64>().ok().map(Value::from),
        Kind::Float => raw.trim().parse::<f64>().ok().map(Value::from),
        Kind::Bool => match raw.trim() {
            "true" | "1" => Some(Value::from(true)),
            "false" | "0" => Some(Value::from(false)),
            _ => None,
        },
        Kind::Str => Some(Value::from(raw)),
    }
}
