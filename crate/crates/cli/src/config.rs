//! `key=value` run configuration: defaults, then the config file, then
//! command-line settings. Keys outside the command's set are rejected.

use std::collections::BTreeMap;
use std::str::FromStr;

use cayley_core::engine::{fmt17, TrainConfig};

use crate::CliError;

/// Resolved settings for one command.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    command: &'static str,
    allowed: Vec<String>,
    values: BTreeMap<String, String>,
}

fn train_defaults() -> serde_json::Map<String, serde_json::Value> {
    match serde_json::to_value(TrainConfig::default()).expect("config serializes") {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("struct serializes to an object"),
    }
}

fn train_keys() -> Vec<String> {
    train_defaults().keys().cloned().collect()
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {raw:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// `keys` are the command's own keys with their defaults (`None` for
    /// keys without one); training keys are always accepted when `train` is
    /// set.
    pub fn new(command: &'static str, keys: &[(&'static str, Option<&str>)], train: bool) -> Self {
        let mut values = BTreeMap::new();
        let mut allowed: Vec<String> = keys.iter().map(|(k, _)| (*k).to_string()).collect();
        for (k, d) in keys {
            if let Some(d) = d {
                values.insert((*k).to_string(), (*d).to_string());
            }
        }
        if train {
            for (k, v) in train_defaults() {
                let text = match v.as_f64() {
                    Some(x) if !v.is_u64() => fmt17(x),
                    _ => v.to_string(),
                };
                allowed.push(k.clone());
                values.insert(k, text);
            }
        }
        RunConfig { command, allowed, values }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !self.allowed.iter().any(|k| k == key) {
            return Err(CliError::Usage(format!("unknown key {key:?} for {}", self.command)));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) -> Result<(), CliError> {
        match value {
            Some(v) => self.set(key, &v.to_string()),
            None => Ok(()),
        }
    }

    pub fn merge_text(&mut self, text: &str) -> Result<(), CliError> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Usage(format!("{} needs {key}", self.command)))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| CliError::Usage(format!("bad value {raw:?} for {key}")))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key).map(|_| self.parse(key)).transpose()
    }

    /// Comma-separated list under `key`.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        self.require(key)?
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| CliError::Usage(format!("bad item {s:?} in {key}"))))
            .collect()
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let mut map = train_defaults();
        for key in train_keys() {
            let Some(raw) = self.get(&key) else { continue };
            let value = if map[&key].is_u64() {
                raw.parse::<u64>().map(serde_json::Value::from).map_err(|_| ())
            } else {
                raw.parse::<f64>().map_err(|_| ()).and_then(|x| serde_json::Number::from_f64(x).map(serde_json::Value::Number).ok_or(()))
            }
            .map_err(|_| CliError::Usage(format!("bad value {raw:?} for {key}")))?;
            map.insert(key, value);
        }
        let cfg: TrainConfig = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| CliError::Usage(format!("training config: {e}")))?;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    /// The resolved settings as a config file that reproduces this run.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// The resolved settings as a JSON object of strings.
    pub fn to_json(&self) -> String {
        let items: Vec<String> = self
            .values
            .iter()
            .map(|(k, v)| {
                format!("{}:{}", serde_json::to_string(k).expect("string"), serde_json::to_string(v).expect("string"))
            })
            .collect();
        format!("{{{}}}", items.join(","))
    }
}
