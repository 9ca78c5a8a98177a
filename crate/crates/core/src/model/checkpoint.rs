//! Self-sufficient model checkpoints: parameters, configuration, and the
//! preprocessing state needed to run prediction from raw CSV input.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, VocabSizes};
use super::net::Model;
use crate::autodiff::ParamSet;
use crate::ingest::{CoordScaler, Vocabularies};
use crate::{Error, Result};

/// On-disk model snapshot. Parameter order matches creation order, so a
/// round trip is byte-stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub vocabularies: Vocabularies,
    pub scaler: CoordScaler,
    pub params: ParamSet,
}

impl Checkpoint {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn from_model(model: &Model, vocabularies: &Vocabularies, scaler: &CoordScaler) -> Self {
        Checkpoint {
            format_version: Self::FORMAT_VERSION,
            config: *model.config(),
            vocabularies: vocabularies.clone(),
            scaler: *scaler,
            params: model.params.clone(),
        }
    }

    /// Validates the snapshot and reassembles a runnable model. Every
    /// parameter must exist with the shape the configuration implies, and
    /// all values must be finite.
    pub fn into_model(self) -> Result<(Model, Vocabularies, CoordScaler)> {
        if self.format_version != Self::FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {})",
                self.format_version,
                Self::FORMAT_VERSION
            )));
        }
        self.vocabularies.validate()?;
        self.scaler.validate()?;
        let vocab = VocabSizes::from_vocabularies(&self.vocabularies);
        let mut model = Model::new(self.config, vocab, 0)?;

        if self.params.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, configuration implies {}",
                self.params.len(),
                model.params.len()
            )));
        }
        for (name, expected) in model.params.iter() {
            let stored = self.params.get(name).ok_or_else(|| {
                Error::Checkpoint(format!("checkpoint is missing parameter {name:?}"))
            })?;
            if stored.shape() != expected.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name:?} has shape {:?}, expected {:?}",
                    stored.shape(),
                    expected.shape()
                )));
            }
            if !stored.is_finite() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name:?} contains non-finite values"
                )));
            }
        }
        model.params = self.params;
        for (_, tensor) in model.params.iter_mut() {
            tensor.set_requires_grad(true);
        }
        Ok((model, self.vocabularies, self.scaler))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_vocabularies, generate_synthetic, SynthConfig};
    use tempfile::tempdir;

    fn fixture() -> (Model, Vocabularies, CoordScaler) {
        let rallies = generate_synthetic(25, 8, &SynthConfig::default()).unwrap();
        let vocabularies = build_vocabularies(&rallies);
        let scaler = CoordScaler::fit(&rallies).unwrap();
        let config = ModelConfig {
            dim: 8,
            layers: 1,
            n_heads: 2,
            dropout: 0.1,
        };
        let vocab = VocabSizes::from_vocabularies(&vocabularies);
        let model = Model::new(config, vocab, 4).unwrap();
        (model, vocabularies, scaler)
    }

    #[test]
    fn save_load_round_trips_params_exactly() {
        let (model, vocabularies, scaler) = fixture();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        Checkpoint::from_model(&model, &vocabularies, &scaler)
            .save(&path)
            .unwrap();
        let (loaded, loaded_vocabs, loaded_scaler) =
            Checkpoint::load(&path).unwrap().into_model().unwrap();
        assert_eq!(loaded_vocabs, vocabularies);
        assert_eq!(loaded_scaler, scaler);
        assert_eq!(loaded.params.len(), model.params.len());
        for (name, tensor) in model.params.iter() {
            assert_eq!(tensor.data(), loaded.params.get(name).unwrap().data());
            assert!(loaded.params.get(name).unwrap().requires_grad());
        }
    }

    #[test]
    fn save_is_byte_deterministic() {
        let (model, vocabularies, scaler) = fixture();
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let checkpoint = Checkpoint::from_model(&model, &vocabularies, &scaler);
        checkpoint.save(&a).unwrap();
        checkpoint.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let (model, vocabularies, scaler) = fixture();
        let mut checkpoint = Checkpoint::from_model(&model, &vocabularies, &scaler);
        let tensor = checkpoint.params.get("head.area.b").unwrap().clone();
        checkpoint.params.replace("head.area.b", {
            let mut t = crate::autodiff::Tensor::zeros(vec![1, 4]);
            t.data_mut().copy_from_slice(&tensor.data()[..4]);
            t
        });
        let err = checkpoint.into_model().unwrap_err();
        assert!(err.to_string().contains("head.area.b"), "error: {err}");
    }

    #[test]
    fn missing_parameter_is_rejected() {
        let (model, vocabularies, scaler) = fixture();
        let mut checkpoint = Checkpoint::from_model(&model, &vocabularies, &scaler);
        checkpoint.params.remove("final_ln.g");
        let err = checkpoint.into_model().unwrap_err();
        assert!(err.to_string().contains("parameter"), "error: {err}");
    }

    #[test]
    fn non_finite_parameter_is_rejected() {
        let (model, vocabularies, scaler) = fixture();
        let mut checkpoint = Checkpoint::from_model(&model, &vocabularies, &scaler);
        checkpoint
            .params
            .get_mut("emb1.player")
            .unwrap()
            .data_mut()[0] = f64::NAN;
        let err = checkpoint.into_model().unwrap_err();
        assert!(err.to_string().contains("non-finite"), "error: {err}");
    }

    #[test]
    fn wrong_format_version_is_rejected() {
        let (model, vocabularies, scaler) = fixture();
        let mut checkpoint = Checkpoint::from_model(&model, &vocabularies, &scaler);
        checkpoint.format_version = 99;
        assert!(checkpoint.into_model().is_err());
    }
}
