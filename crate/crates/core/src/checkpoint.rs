//! JSON checkpoints holding everything needed to rebuild a trained model.
//!
//! Floats are written with shortest round-trip formatting, so a saved and
//! reloaded model is bit-identical to the original.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelSchema, Vocabulary, UNKNOWN_TOKEN};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::params::ParamStore;
use crate::training::{LossWeights, TrainConfig};

pub const FORMAT: &str = "darter-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_weights: Option<LossWeights>,
    pub schema: LabelSchema,
    pub vocab: Vocabulary,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn from_model(model: &Model, train: Option<&TrainConfig>, weights: Option<LossWeights>) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            model: model.config.clone(),
            train: train.cloned(),
            loss_weights: weights,
            schema: model.schema.clone(),
            vocab: model.vocab.clone(),
            params: model.params.clone(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint format `{}` version {}",
                self.format, self.version
            )));
        }
        if self.vocab.tokens().first().map(String::as_str) != Some(UNKNOWN_TOKEN) {
            return Err(Error::Config(format!("checkpoint vocabulary must start with `{UNKNOWN_TOKEN}`")));
        }
        Model::from_parts(self.model, self.schema, self.vocab, self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|source| Error::Json {
            context: "serializing checkpoint".into(),
            source,
        })
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: context.into(),
            source,
        })
    }
}

pub fn save(path: impl AsRef<Path>, model: &Model, train: Option<&TrainConfig>, weights: Option<LossWeights>) -> Result<()> {
    let path = path.as_ref();
    let json = Checkpoint::from_model(model, train, weights).to_json()?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    load_checkpoint(path)?.into_model()
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotatedSentence, AnnotationMode};
    use crate::model::ModelVariant;

    fn model(config: ModelConfig) -> Model {
        let schema = LabelSchema::new(vec!["A".into()], vec!["r".into(), "q".into()], AnnotationMode::TailOnly).unwrap();
        let s = AnnotatedSentence::unlabeled(vec!["x".into(), "y".into()], AnnotationMode::TailOnly);
        Model::new(config, schema, Vocabulary::build([&s]), 11).unwrap()
    }

    fn small() -> ModelConfig {
        ModelConfig {
            embed_dim: 3,
            hidden_dim: 4,
            decoder_width: 5,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        for cfg in [small(), ModelConfig { variant: ModelVariant::BiDarter, n_layers: 2, ..small() }] {
            let mut m = model(cfg);
            // Values that do not survive naive decimal formatting.
            m.params.get_mut("ner.b_out").unwrap().data_mut()[0] = 0.1 + 0.2;
            m.params.get_mut("re.b_h").unwrap().data_mut()[0] = f64::MIN_POSITIVE;
            save(&path, &m, Some(&TrainConfig::default()), Some(LossWeights { gamma: 0.85, delta: 0.75 })).unwrap();
            let back = load(&path).unwrap();
            assert_eq!(back.params, m.params);
            assert_eq!(back.config, m.config);
            assert_eq!(back.schema, m.schema);
            assert_eq!(back.vocab, m.vocab);
            let ck = load_checkpoint(&path).unwrap();
            assert_eq!(ck.loss_weights.unwrap().gamma, 0.85);
        }
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let m = model(small());
        let mut ck = Checkpoint::from_model(&m, None, None);
        ck.model.hidden_dim = 6;
        assert_eq!(ck.into_model().unwrap_err().exit_code(), 2);

        let mut ck = Checkpoint::from_model(&m, None, None);
        ck.version = 99;
        assert!(ck.into_model().is_err());
    }

    #[test]
    fn garbage_is_a_json_error() {
        let err = Checkpoint::from_json("{not json", "ck").unwrap_err();
        assert!(matches!(err, Error::Json { .. }));
    }
}
