use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature columns of the processed Cleveland file, in file order.
pub const CLEVELAND_COLUMNS: [&str; 13] = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach", "exang", "oldpeak", "slope", "ca", "thal",
];

pub const TARGET_COLUMN: &str = "num";

const CATEGORICAL: [&str; 8] = ["sex", "cp", "fbs", "restecg", "exang", "slope", "ca", "thal"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Distinct non-missing values seen in the loaded file, ascending.
    pub categories: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub columns: Vec<ColumnSpec>,
    pub target: String,
}

impl ColumnSchema {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Changes the kind of one column.
    pub fn set_kind(&mut self, name: &str, kind: ColumnKind) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::config(format!("no column named '{name}'")))?;
        self.columns[i].kind = kind;
        Ok(())
    }
}

/// Parsed rows with missing cells as `None`, plus the raw target and its
/// binary form.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub schema: ColumnSchema,
    pub rows: Vec<Vec<Option<f64>>>,
    pub num: Vec<f64>,
    pub y: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    /// Rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Vec<Vec<Option<f64>>> {
        idx.iter().map(|&i| self.rows[i].clone()).collect()
    }

    pub fn select_labels(&self, idx: &[usize]) -> Vec<u8> {
        idx.iter().map(|&i| self.y[i]).collect()
    }

    /// Serializes in the comma format `parse_cleveland` reads, with a header.
    pub fn to_csv(&self) -> String {
        let mut out = self.schema.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",");
        out.push(',');
        out.push_str(&self.schema.target);
        out.push('\n');
        for (row, num) in self.rows.iter().zip(&self.num) {
            for cell in row {
                match cell {
                    Some(v) => out.push_str(&format!("{v:?}")),
                    None => out.push('?'),
                }
                out.push(',');
            }
            out.push_str(&format!("{num:?}\n"));
        }
        out
    }
}

/// Maps `num > 0` to 1.
pub fn binarize_target(num: &[f64]) -> Result<Vec<u8>> {
    num.iter()
        .map(|&v| {
            if v.fract() != 0.0 || !(0.0..=4.0).contains(&v) {
                Err(Error::Data(format!("target value {v} is outside 0..=4")))
            } else {
                Ok(u8::from(v > 0.0))
            }
        })
        .collect()
}

pub fn load_cleveland(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_cleveland(&text)
}

/// Parses the processed Cleveland format: 14 comma-separated fields per line,
/// `?` for missing. A header line naming the columns is accepted.
pub fn parse_cleveland(text: &str) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut num = Vec::new();
    let expected = CLEVELAND_COLUMNS.len() + 1;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(Error::Format {
                line: line_no,
                msg: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        if rows.is_empty() && num.is_empty() && fields[0].eq_ignore_ascii_case("age") {
            let names: Vec<&str> = CLEVELAND_COLUMNS.iter().copied().chain([TARGET_COLUMN]).collect();
            if fields.iter().zip(&names).any(|(f, n)| !f.eq_ignore_ascii_case(n)) {
                return Err(Error::Format {
                    line: line_no,
                    msg: format!("header must be {}", names.join(",")),
                });
            }
            continue;
        }
        let mut row = Vec::with_capacity(expected - 1);
        for (j, field) in fields.iter().enumerate() {
            let cell = if *field == "?" {
                None
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Format {
                    line: line_no,
                    msg: format!("column {}: cannot parse '{field}' as a number", j + 1),
                })?;
                if !v.is_finite() {
                    return Err(Error::Format {
                        line: line_no,
                        msg: format!("column {}: non-finite value", j + 1),
                    });
                }
                Some(v)
            };
            row.push(cell);
        }
        let target = row.pop().flatten().ok_or_else(|| Error::Format {
            line: line_no,
            msg: "target is missing".into(),
        })?;
        rows.push(row);
        num.push(target);
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let y = binarize_target(&num)?;
    let columns = CLEVELAND_COLUMNS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let kind = if CATEGORICAL.contains(name) {
                ColumnKind::Categorical
            } else {
                ColumnKind::Numeric
            };
            let mut cats: Vec<f64> = rows.iter().filter_map(|r: &Vec<Option<f64>>| r[j]).collect();
            cats.sort_by(f64::total_cmp);
            cats.dedup();
            if kind == ColumnKind::Numeric {
                cats.clear();
            }
            ColumnSpec {
                name: name.to_string(),
                kind,
                categories: cats,
            }
        })
        .collect();
    Ok(Dataset {
        schema: ColumnSchema {
            columns,
            target: TARGET_COLUMN.into(),
        },
        rows,
        num,
        y,
    })
}
