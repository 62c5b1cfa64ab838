//! Versioned, human-readable model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelAlphabet, TokenizerConfig};
use crate::error::{Error, Result};
use crate::pipeline::Extractor;

pub const FORMAT_VERSION: u32 = 1;

/// One trained model for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub attribute: String,
    pub tokenizer: TokenizerConfig,
    pub extractor: Extractor,
}

impl ModelArtifact {
    pub fn new(alphabet: &LabelAlphabet, tokenizer: TokenizerConfig, extractor: Extractor) -> Self {
        ModelArtifact {
            format_version: FORMAT_VERSION,
            attribute: alphabet.attribute.clone(),
            tokenizer,
            extractor,
        }
    }

    pub fn kind(&self) -> String {
        self.extractor.name()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Checks the version before decoding the rest of the file.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::InvalidConfig("model file has no format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let artifact: ModelArtifact = serde_json::from_value(value)?;
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.extractor {
            Extractor::Linear(m) => m.validate(),
            Extractor::Hmm(m) => m.validate(),
            _ => Ok(()),
        }
    }
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    fs::write(path, artifact.to_json()?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    ModelArtifact::from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::{LinearModel, ModelKind};
    use crate::features::{FeatureConfig, FeatureIndex};
    use crate::pipeline::ModelSpec;
    use crate::synth::{generate_catalog, GeneratorConfig};

    fn alphabet() -> LabelAlphabet {
        LabelAlphabet::new("brand")
    }

    #[test]
    fn crf_round_trip_preserves_predictions() {
        let cat = generate_catalog(&GeneratorConfig { num_values: 40, rng_seed: 2, ..Default::default() }).unwrap();
        let (train, test) = cat.titles.split_at(cat.titles.len() - 100.min(cat.titles.len() / 2));
        let model = Extractor::train(&ModelSpec::parse("crf", 0).unwrap(), train, None, &alphabet()).unwrap();
        let art = ModelArtifact::new(&alphabet(), TokenizerConfig::default(), model);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("crf.json");
        save_model(&art, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, art);
        for t in test {
            assert_eq!(back.extractor.extract(&t.title).unwrap(), art.extractor.extract(&t.title).unwrap());
        }
    }

    #[test]
    fn bumped_version_is_rejected() {
        let model = LinearModel::zeros(
            FeatureIndex::from_names(["bias|O"]),
            alphabet(),
            FeatureConfig::crf_set(),
            ModelKind::Perceptron,
        );
        let art = ModelArtifact::new(&alphabet(), TokenizerConfig::default(), Extractor::Linear(model));
        let text = art.to_json().unwrap().replace("\"format_version\": 1", "\"format_version\": 2");
        match ModelArtifact::from_json(&text) {
            Err(Error::VersionMismatch { found: 2, expected: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_weights_survive() {
        let model = LinearModel::zeros(
            FeatureIndex::from_names(["bias|O", "bias|B"]),
            alphabet(),
            FeatureConfig::crf_set(),
            ModelKind::Crf,
        );
        let art = ModelArtifact::new(&alphabet(), TokenizerConfig::default(), Extractor::Linear(model));
        let back = ModelArtifact::from_json(&art.to_json().unwrap()).unwrap();
        match back.extractor {
            Extractor::Linear(m) => assert_eq!(m.weights, vec![0.0, 0.0]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn corrupted_files() {
        assert!(ModelArtifact::from_json("{not json").is_err());
        assert!(ModelArtifact::from_json("{\"format_version\": 1}").is_err());
        assert!(ModelArtifact::from_json("{}").is_err());
    }
}
