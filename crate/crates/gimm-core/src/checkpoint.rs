//! Versioned JSON checkpoints for generator and encoder parameters.
//!
//! Tensors serialize through serde_json, whose shortest-round-trip float
//! printing reproduces every finite binary64 value bit-exactly on reload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorData {
    pub rows: usize,
    pub cols: usize,
    pub requires_grad: bool,
    pub data: Vec<f64>,
}

impl From<&Tensor> for TensorData {
    fn from(t: &Tensor) -> Self {
        TensorData {
            rows: t.rows,
            cols: t.cols,
            requires_grad: t.requires_grad,
            data: t.data.clone(),
        }
    }
}

impl TensorData {
    pub fn into_tensor(self) -> Result<Tensor> {
        let mut t = Tensor::new(self.rows, self.cols, self.data)?;
        t.requires_grad = self.requires_grad;
        Ok(t)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: BTreeMap<String, TensorData>,
}

impl Checkpoint {
    pub fn new(kind: &str, config: serde_json::Value) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: kind.to_string(),
            config,
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, t: &Tensor) {
        self.tensors.insert(name.to_string(), t.into());
    }

    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        self.tensors
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))?
            .into_tensor()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        for (name, t) in &self.tensors {
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!(
                    "tensor {name:?} holds non-finite values"
                )));
            }
        }
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, body).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>, expected_kind: &str) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ckpt: Checkpoint =
            serde_json::from_str(&body).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} not supported (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        if ckpt.kind != expected_kind {
            return Err(Error::Checkpoint(format!(
                "checkpoint kind {:?}, expected {expected_kind:?}",
                ckpt.kind
            )));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut t = Tensor::new(2, 2, vec![0.1, -0.0, 1.0 / 3.0, f64::MIN_POSITIVE]).unwrap();
        t.requires_grad = true;
        let mut ckpt = Checkpoint::new("generator", serde_json::json!({"lr": 1e-3}));
        ckpt.insert("w", &t);

        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("ckpt.json");
        ckpt.save(&path).unwrap();
        let mut back = Checkpoint::load(&path, "generator").unwrap();
        let w = back.take("w").unwrap();
        assert_eq!(w.data.len(), t.data.len());
        for (a, b) in w.data.iter().zip(&t.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(w.requires_grad);
    }

    #[test]
    fn wrong_kind_and_version_rejected() {
        let ckpt = Checkpoint::new("generator", serde_json::Value::Null);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("ckpt.json");
        ckpt.save(&path).unwrap();
        assert!(Checkpoint::load(&path, "encoder").is_err());

        let mut stale = ckpt.clone();
        stale.format_version = 999;
        let body = serde_json::to_string(&stale).unwrap();
        std::fs::write(&path, body).unwrap();
        assert!(matches!(
            Checkpoint::load(&path, "generator"),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn non_finite_values_refused() {
        let t = Tensor::new(1, 1, vec![f64::NAN]).unwrap();
        let mut ckpt = Checkpoint::new("generator", serde_json::Value::Null);
        ckpt.insert("w", &t);
        let tmp = tempfile::tempdir().unwrap();
        assert!(ckpt.save(tmp.path().join("x.json")).is_err());
    }
}
