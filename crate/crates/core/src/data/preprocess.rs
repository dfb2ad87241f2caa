use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

use super::load::{ColumnKind, ColumnSchema};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    /// Per-column kind overrides on top of the registry.
    pub kinds: BTreeMap<String, ColumnKind>,
    /// Standardize one-hot indicator columns as well as numeric ones.
    pub standardize_indicators: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            kinds: BTreeMap::new(),
            standardize_indicators: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Train median (numeric) or train mode (categorical) used for missing cells.
    pub fill: f64,
    /// Train-observed categories in ascending order; empty for numeric columns.
    pub categories: Vec<f64>,
}

/// Statistics learned from a training split. Immutable once fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedStats {
    pub columns: Vec<FittedColumn>,
    /// Encoded column names in token order.
    pub encoded: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl FittedStats {
    pub fn width(&self) -> usize {
        self.encoded.len()
    }

    /// Encodes raw rows with these statistics.
    pub fn transform(&self, rows: &[Vec<Option<f64>>]) -> Result<Matrix> {
        let mut m = self.encode(rows)?;
        let w = self.width();
        for r in 0..m.rows() {
            for (j, v) in m.row_mut(r).iter_mut().enumerate().take(w) {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
        Ok(m)
    }

    /// Imputed one-hot encoding before standardization.
    fn encode(&self, rows: &[Vec<Option<f64>>]) -> Result<Matrix> {
        let w = self.width();
        let mut data = Vec::with_capacity(rows.len() * w);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::Schema {
                    expected: self.columns.len(),
                    got: row.len(),
                });
            }
            for (col, cell) in self.columns.iter().zip(row) {
                let v = cell.unwrap_or(col.fill);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("row {i}, column {}", col.name)));
                }
                match col.kind {
                    ColumnKind::Numeric => data.push(v),
                    // an unseen category leaves its whole group at zero
                    ColumnKind::Categorical => data.extend(col.categories.iter().map(|&c| f64::from(u8::from(c == v)))),
                }
            }
        }
        Matrix::from_vec(rows.len(), w, data)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Most frequent value; ties go to the smaller value.
fn mode(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (values[0], 0);
    let mut i = 0;
    while i < values.len() {
        let mut j = i;
        while j < values.len() && values[j] == values[i] {
            j += 1;
        }
        if j - i > best_n {
            best = values[i];
            best_n = j - i;
        }
        i = j;
    }
    best
}

fn format_category(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Imputation, one-hot expansion and standardization, fit on training rows only.
#[derive(Clone, Debug)]
pub struct Preprocessor {
    schema: ColumnSchema,
    config: PrepConfig,
    fitted: Option<FittedStats>,
}

impl Preprocessor {
    pub fn new(schema: &ColumnSchema, config: &PrepConfig) -> Result<Self> {
        let mut schema = schema.clone();
        for (name, kind) in &config.kinds {
            schema.set_kind(name, *kind)?;
        }
        Ok(Preprocessor {
            schema,
            config: config.clone(),
            fitted: None,
        })
    }

    pub fn fitted(&self) -> Option<&FittedStats> {
        self.fitted.as_ref()
    }

    /// Learns statistics from `rows` and returns their encoding.
    pub fn fit_transform(&mut self, rows: &[Vec<Option<f64>>]) -> Result<Matrix> {
        if rows.is_empty() {
            return Err(Error::Data("cannot fit preprocessing on zero rows".into()));
        }
        let mut columns = Vec::with_capacity(self.schema.len());
        let mut encoded = Vec::new();
        let mut indicator = Vec::new();
        if let Some(row) = rows.iter().find(|r| r.len() != self.schema.len()) {
            return Err(Error::Schema {
                expected: self.schema.len(),
                got: row.len(),
            });
        }
        for (j, spec) in self.schema.columns.iter().enumerate() {
            let mut present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
            if present.is_empty() {
                return Err(Error::Data(format!("column {} has no observed values", spec.name)));
            }
            let col = match spec.kind {
                ColumnKind::Numeric => {
                    encoded.push(spec.name.clone());
                    indicator.push(false);
                    FittedColumn {
                        name: spec.name.clone(),
                        kind: ColumnKind::Numeric,
                        fill: median(&mut present),
                        categories: Vec::new(),
                    }
                }
                ColumnKind::Categorical => {
                    let fill = mode(&mut present);
                    present.dedup();
                    for &c in &present {
                        encoded.push(format!("{}={}", spec.name, format_category(c)));
                        indicator.push(true);
                    }
                    FittedColumn {
                        name: spec.name.clone(),
                        kind: ColumnKind::Categorical,
                        fill,
                        categories: present,
                    }
                }
            };
            columns.push(col);
        }
        let w = encoded.len();
        let mut stats = FittedStats {
            columns,
            encoded,
            means: vec![0.0; w],
            stds: vec![1.0; w],
        };
        let raw = stats.encode(rows)?;
        let n = raw.rows() as f64;
        for j in 0..w {
            if indicator[j] && !self.config.standardize_indicators {
                continue;
            }
            let col: Vec<f64> = (0..raw.rows()).map(|r| raw.get(r, j)).collect();
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if lo == hi {
                // constant column: centre exactly and leave the scale alone
                stats.means[j] = lo;
                continue;
            }
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            stats.means[j] = mean;
            stats.stds[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let out = stats.transform(rows)?;
        self.fitted = Some(stats);
        Ok(out)
    }

    pub fn transform(&self, rows: &[Vec<Option<f64>>]) -> Result<Matrix> {
        self.fitted
            .as_ref()
            .ok_or_else(|| Error::State("transform called before fit".into()))?
            .transform(rows)
    }

    pub fn into_fitted(self) -> Option<FittedStats> {
        self.fitted
    }
}
