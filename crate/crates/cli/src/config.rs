use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use resgru_core::data::{ColumnKind, PrepConfig};
use resgru_core::eval::Protocol;
use resgru_core::model::ModelConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::UsageError;

/// Keys that belong to the protocol rather than the model.
const PROTOCOL_KEYS: [&str; 4] = ["folds", "standardize_indicators", "numeric_columns", "categorical_columns"];

/// Effective configuration of a run: one flat key space covering the model,
/// the training recipe and the protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub protocol: Protocol,
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn string_list(v: Value, key: &str) -> Result<Vec<String>> {
    match v {
        Value::Array(items) => items
            .into_iter()
            .map(|i| i.as_str().map(str::to_string).ok_or_else(|| anyhow!("{key} must list column names")))
            .collect(),
        Value::String(s) => Ok(s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()),
        _ => bail!("{key} must be a list of column names"),
    }
}

impl RunConfig {
    /// Reads an optional flat TOML file, then applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| UsageError(format!("config {} is not valid TOML: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| UsageError(format!("override '{o}' is not key=value")))?;
            table.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        Self::from_table(table).map_err(|e| UsageError(format!("{e:#}")).into())
    }

    fn from_table(mut table: Table) -> Result<Self> {
        let mut protocol = Protocol::default();
        let mut kinds = BTreeMap::new();
        for key in PROTOCOL_KEYS {
            let Some(v) = table.remove(key) else { continue };
            match key {
                "folds" => {
                    protocol.folds = v
                        .as_integer()
                        .and_then(|i| usize::try_from(i).ok())
                        .ok_or_else(|| anyhow!("folds must be a positive integer"))?
                }
                "standardize_indicators" => {
                    protocol.prep.standardize_indicators =
                        v.as_bool().ok_or_else(|| anyhow!("standardize_indicators must be true or false"))?
                }
                "numeric_columns" => {
                    for c in string_list(v, key)? {
                        kinds.insert(c, ColumnKind::Numeric);
                    }
                }
                _ => {
                    for c in string_list(v, key)? {
                        kinds.insert(c, ColumnKind::Categorical);
                    }
                }
            }
        }
        protocol.prep = PrepConfig { kinds, ..protocol.prep };
        let model: ModelConfig = Value::Table(table).try_into().context("invalid model configuration")?;
        model.validate()?;
        Ok(RunConfig { model, protocol })
    }

    /// The flat key listing echoed into manifests.
    pub fn to_flat_toml(&self) -> String {
        let mut t: Table = Value::try_from(&self.model)
            .ok()
            .and_then(|v| v.as_table().cloned())
            .unwrap_or_default();
        t.insert("folds".into(), Value::Integer(self.protocol.folds as i64));
        t.insert("standardize_indicators".into(), Value::Boolean(self.protocol.prep.standardize_indicators));
        for (key, kind) in [("numeric_columns", ColumnKind::Numeric), ("categorical_columns", ColumnKind::Categorical)] {
            let cols: Vec<Value> = self
                .protocol
                .prep
                .kinds
                .iter()
                .filter(|(_, k)| **k == kind)
                .map(|(c, _)| Value::String(c.clone()))
                .collect();
            t.insert(key.into(), Value::Array(cols));
        }
        toml::to_string(&t).expect("config serializes")
    }
}
