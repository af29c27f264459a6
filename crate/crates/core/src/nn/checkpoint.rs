//! Versioned JSON checkpoints bound to a feature-name order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{MlpModel, OutputHead};
use crate::error::{Error, Result};
use crate::kinematics::NormParams;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlob {
    pub sizes: Vec<usize>,
    pub head: OutputHead,
    pub params: Vec<f64>,
}

impl NetworkBlob {
    pub fn from_model(model: &MlpModel) -> Self {
        Self { sizes: model.sizes().to_vec(), head: model.head(), params: model.flatten() }
    }

    pub fn to_model(&self) -> Result<MlpModel> {
        if self.sizes.len() < 3 {
            return Err(Error::Checkpoint(format!("architecture {:?} has no hidden layer", self.sizes)));
        }
        let hidden = &self.sizes[1..self.sizes.len() - 1];
        let mut model =
            MlpModel::zeros(self.sizes[0], hidden, *self.sizes.last().unwrap(), self.head).map_err(|e| Error::Checkpoint(e.to_string()))?;
        model.set_flat(&self.params).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(model)
    }
}

/// Trained networks plus the normalization and feature order they expect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub norm: NormParams,
    pub networks: BTreeMap<String, NetworkBlob>,
}

impl Checkpoint {
    pub fn new(norm: NormParams) -> Self {
        Self { version: CHECKPOINT_VERSION, feature_names: norm.names.clone(), norm, networks: BTreeMap::new() }
    }

    pub fn with_network(mut self, role: &str, model: &MlpModel) -> Self {
        self.networks.insert(role.to_string(), NetworkBlob::from_model(model));
        self
    }

    pub fn network(&self, role: &str) -> Result<MlpModel> {
        self.networks.get(role).ok_or_else(|| Error::Checkpoint(format!("no '{role}' network in checkpoint")))?.to_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Loads a checkpoint and refuses it unless its feature order equals `expected`.
    pub fn load(path: &Path, expected: &[String]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        ck.check(expected)?;
        Ok(ck)
    }

    pub fn check(&self, expected: &[String]) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        if self.feature_names != expected || self.norm.names != expected {
            return Err(Error::Checkpoint("feature names differ from the current feature configuration".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    fn sample() -> (Checkpoint, MlpModel) {
        let m = MlpModel::new(6, &[4, 3], 1, OutputHead::SigmoidBinary, 11).unwrap();
        let norm = NormParams { names: names(3), mean: vec![0.0, 1.0, 2.0], std: vec![1.0, 2.0, 0.5] };
        (Checkpoint::new(norm).with_network("classifier", &m), m)
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let (ck, m) = sample();
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path, &names(3)).unwrap();
        assert_eq!(back.network("classifier").unwrap(), m);
        assert!(back.network("q_online").is_err());
    }

    #[test]
    fn name_mismatch_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        sample().0.save(&path).unwrap();
        let mut other = names(3);
        other.swap(0, 1);
        assert!(matches!(Checkpoint::load(&path, &other), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::load(&path, &names(4)).is_err());
    }
}
