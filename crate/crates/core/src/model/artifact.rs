use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FittedStats;
use crate::error::{Error, Result};
use crate::layers::ParamSet;
use crate::numkit::Matrix;

use super::config::ModelConfig;
use super::network::Network;

const MAGIC: &[u8; 8] = b"RESGRUM\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    inputs: usize,
    stats: FittedStats,
    threshold: f64,
    tensors: Vec<TensorHeader>,
}

/// A trained network bundled with the preprocessing it was trained behind and
/// its tuned decision threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub stats: FittedStats,
    pub threshold: f64,
}

impl TrainedModel {
    pub fn new(network: Network, stats: FittedStats, threshold: f64) -> Result<Self> {
        if !(0.1 - 1e-12..=0.9 + 1e-12).contains(&threshold) {
            return Err(Error::Artifact(format!("threshold {threshold} is outside [0.1, 0.9]")));
        }
        if stats.width() != network.inputs() {
            return Err(Error::Schema {
                expected: network.inputs(),
                got: stats.width(),
            });
        }
        Ok(TrainedModel {
            network,
            stats,
            threshold,
        })
    }

    /// Probabilities for raw (unencoded) rows.
    pub fn predict_raw(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
        self.network.predict_proba(&self.stats.transform(rows)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let ps = self.network.params();
        let header = Header {
            config: self.network.config().clone(),
            inputs: self.network.inputs(),
            stats: self.stats.clone(),
            threshold: self.threshold,
            tensors: ps
                .names()
                .iter()
                .zip(ps.tensors())
                .map(|(n, t)| TensorHeader {
                    name: n.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Artifact(e.to_string()))?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * ps.scalar_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in ps.tensors() {
            for v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Artifact(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a model artifact"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Artifact(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| Error::Artifact(e.to_string()))?;
        let mut offset = 20 + hlen;
        let mut names = Vec::with_capacity(header.tensors.len());
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for t in &header.tensors {
            let n = t.rows * t.cols;
            let raw = bytes.get(offset..offset + 8 * n).ok_or_else(|| bad("truncated tensor data"))?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push(Matrix::from_vec(t.rows, t.cols, data).map_err(|e| Error::Artifact(e.to_string()))?);
            names.push(t.name.clone());
            offset += 8 * n;
        }
        if offset != bytes.len() {
            return Err(bad("trailing bytes after tensor data"));
        }
        let network = Network::from_params(&header.config, header.inputs, ParamSet::from_parts(names, tensors))?;
        TrainedModel::new(network, header.stats, header.threshold)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        TrainedModel::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnKind, ColumnSchema, ColumnSpec, PrepConfig, Preprocessor};
    use crate::numkit::Rng;

    fn fixture() -> (TrainedModel, Vec<Vec<Option<f64>>>) {
        let schema = ColumnSchema {
            columns: vec![
                ColumnSpec { name: "a".into(), kind: ColumnKind::Numeric, categories: vec![] },
                ColumnSpec { name: "b".into(), kind: ColumnKind::Categorical, categories: vec![] },
            ],
            target: "num".into(),
        };
        let mut rng = Rng::new(5);
        let rows: Vec<Vec<Option<f64>>> =
            (0..20).map(|i| vec![Some(rng.normal() / 3.0), Some(f64::from(i % 3))]).collect();
        let mut p = Preprocessor::new(&schema, &PrepConfig::default()).unwrap();
        let x = p.fit_transform(&rows).unwrap();
        let cfg = ModelConfig { d_model: 4, blocks: 1, attn_layers: 1, heads: 2, cr_reduction: 2, ..Default::default() };
        let net = Network::new(&cfg, x.cols(), &mut rng).unwrap();
        (TrainedModel::new(net, p.into_fitted().unwrap(), 0.37).unwrap(), rows)
    }

    #[test]
    fn bytes_round_trip_bit_exact() {
        let (model, rows) = fixture();
        let bytes = model.to_bytes().unwrap();
        let back = TrainedModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let a = model.predict_raw(&rows).unwrap();
        let b = back.predict_raw(&rows).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn corrupt_artifacts_are_rejected() {
        let (model, _) = fixture();
        let bytes = model.to_bytes().unwrap();
        assert!(TrainedModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[8] = 9;
        assert!(TrainedModel::from_bytes(&wrong).unwrap_err().to_string().contains("version"));
        assert!(TrainedModel::from_bytes(b"nope").is_err());
    }

    #[test]
    fn threshold_must_lie_on_the_grid_range() {
        let (model, _) = fixture();
        assert!(TrainedModel::new(model.network.clone(), model.stats.clone(), 0.95).is_err());
    }
}
