//! End-to-end extraction model: embeddings, stacked encoder, both heads.

use serde::{Deserialize, Serialize};

use crate::corpus::{embed, AnnotatedSentence, AnnotationMode, LabelSchema, Vocabulary};
use crate::decoder::{
    decode, threshold_predictions, Aggregation, DecoderParams, DecoderVars, EntityLogits,
    PredictionSet, RelationLogits, StreamFeatures,
};
use crate::encoder::{
    encode_stacked, DamOutput, DamParams, DamVars, DirectionSchedule, EncoderOptions, LayerFeed,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{Bound, ParamStore};
use crate::tensor::Tensor;

pub const EMBEDDING: &str = "embedding";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Unidirectional.
    #[default]
    Darter,
    /// Left-to-right then right-to-left layer, both fed to the decoders.
    BiDarter,
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "darter" => Ok(ModelVariant::Darter),
            "bidarter" => Ok(ModelVariant::BiDarter),
            other => Err(Error::Config(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Architecture and ablation switches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub n_layers: usize,
    /// Width `d_p` of the token embeddings.
    pub embed_dim: usize,
    /// Width `d_h` of every encoder cell.
    pub hidden_dim: usize,
    /// Width of the pair projection inside each decoder head.
    pub decoder_width: usize,
    /// Inter-aggregation inside the encoder.
    pub interaction: bool,
    /// Subject/object features mixed into the relation head.
    pub entity_features_in_re: bool,
    pub alpha: f64,
    pub beta: f64,
    pub directions: DirectionSchedule,
    pub layer_feed: LayerFeed,
    /// Exclude entity cells with start > end from the loss.
    pub mask_reversed_spans: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: ModelVariant::Darter,
            n_layers: 1,
            embed_dim: 32,
            hidden_dim: 32,
            decoder_width: 32,
            interaction: true,
            entity_features_in_re: true,
            alpha: 1.0,
            beta: 1.0,
            directions: DirectionSchedule::Alternating,
            layer_feed: LayerFeed::HiddenSum,
            mask_reversed_spans: true,
        }
    }
}

impl ModelConfig {
    pub fn bidarter() -> Self {
        ModelConfig {
            variant: ModelVariant::BiDarter,
            n_layers: 2,
            ..Self::default()
        }
    }

    pub fn aggregation(&self) -> Aggregation {
        Aggregation {
            alpha: self.alpha,
            beta: self.beta,
            entity_features: self.entity_features_in_re,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be at least 1".into()));
        }
        if self.variant == ModelVariant::BiDarter
            && (self.n_layers != 2 || self.directions != DirectionSchedule::Alternating)
        {
            return Err(Error::Config(
                "the bidirectional variant needs exactly 2 layers with alternating directions".into(),
            ));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("embedding and hidden widths must be positive".into()));
        }
        if self.decoder_width < 2 {
            return Err(Error::Config("decoder_width must be at least 2".into()));
        }
        self.aggregation().validate()
    }
}

/// A model bound to one computation record.
#[derive(Clone, Debug)]
pub struct BoundModel {
    pub params: Bound,
    pub embedding: Var,
    pub layers: Vec<DamVars>,
    pub decoder: DecoderVars,
}

/// Result of one forward pass over a sentence.
#[derive(Clone, Debug)]
pub struct Forward {
    pub bound: BoundModel,
    pub x: Var,
    pub layers: Vec<DamOutput>,
    pub entity: EntityLogits,
    pub relation: RelationLogits,
}

/// Parameters, label schema and vocabulary of one extraction model.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub schema: LabelSchema,
    pub vocab: Vocabulary,
    pub params: ParamStore,
    layers: Vec<DamParams>,
    decoder: DecoderParams,
}

impl Model {
    /// Fresh model with seeded initialization.
    pub fn new(config: ModelConfig, schema: LabelSchema, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        schema.validate()?;
        let mut params = ParamStore::new(seed);
        let bound = 1.0 / (config.hidden_dim as f64).sqrt();
        params.uniform(EMBEDDING, &[vocab.len(), config.embed_dim], bound)?;
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let input = if l == 0 { config.embed_dim } else { config.hidden_dim };
            layers.push(DamParams::register(&mut params, &format!("enc{l}"), input, config.hidden_dim)?);
        }
        let decoder = DecoderParams::register(
            &mut params,
            config.n_layers,
            config.hidden_dim,
            config.decoder_width,
            schema.num_entity_types(),
            schema.num_relation_types(),
        )?;
        Ok(Model {
            config,
            schema,
            vocab,
            params,
            layers,
            decoder,
        })
    }

    /// Rebuilds a model around stored parameters, checking every name and shape.
    pub fn from_parts(
        config: ModelConfig,
        schema: LabelSchema,
        vocab: Vocabulary,
        params: ParamStore,
    ) -> Result<Self> {
        let mut model = Model::new(config, schema, vocab, params.seed())?;
        if model.params.len() != params.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, the configured model needs {}",
                params.len(),
                model.params.len()
            )));
        }
        for (name, t) in params.iter() {
            model
                .params
                .set(name, t.clone())
                .map_err(|e| Error::Config(format!("checkpoint tensor `{name}`: {e}")))?;
        }
        Ok(model)
    }

    pub fn layer_params(&self) -> &[DamParams] {
        &self.layers
    }

    pub fn decoder_params(&self) -> &DecoderParams {
        &self.decoder
    }

    pub fn annotation(&self) -> AnnotationMode {
        self.schema.annotation
    }

    pub fn bind(&self, g: &mut Graph) -> Result<BoundModel> {
        let params = self.params.bind(g);
        let layers = self
            .layers
            .iter()
            .map(|l| l.bind(&params))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundModel {
            embedding: self.params.var(&params, EMBEDDING)?,
            decoder: self.decoder.bind(&params)?,
            layers,
            params,
        })
    }

    /// Embeds, encodes and decodes one tokenized sentence.
    pub fn forward(&self, g: &mut Graph, tokens: &[String]) -> Result<Forward> {
        let bound = self.bind(g)?;
        let x = embed(g, tokens, &self.vocab, bound.embedding)?;
        self.forward_from(g, bound, x)
    }

    /// Runs encoder and decoders on an already-placed `[t×d_p]` input.
    pub fn forward_from(&self, g: &mut Graph, bound: BoundModel, x: Var) -> Result<Forward> {
        let opts = EncoderOptions {
            interaction: self.config.interaction,
        };
        let layers = encode_stacked(
            g,
            x,
            &bound.layers,
            self.config.directions,
            self.config.layer_feed,
            opts,
        )?;
        let streams: Vec<StreamFeatures> = layers.iter().map(StreamFeatures::from).collect();
        let (entity, relation) = decode(g, &streams, &bound.decoder, self.config.aggregation())?;
        Ok(Forward {
            bound,
            x,
            layers,
            entity,
            relation,
        })
    }

    /// Which entity cells enter the loss.
    pub fn entity_mask(&self, t: usize) -> Tensor {
        let u = self.schema.num_entity_types();
        let cells = self.annotation().entity_cells();
        let mut mask = Tensor::zeros(&[t, t, u]);
        for i in 0..t {
            for j in 0..t {
                let on = !self.config.mask_reversed_spans || cells.admits(i, j);
                if on {
                    for k in 0..u {
                        mask.set(&[i, j, k], 1.0);
                    }
                }
            }
        }
        mask
    }

    pub fn relation_mask(&self, t: usize) -> Tensor {
        Tensor::full(&[t, t, self.schema.num_relation_types()], 1.0)
    }

    pub fn predict(&self, tokens: &[String], tau: f64) -> Result<PredictionSet> {
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, tokens)?;
        threshold_predictions(
            g.value(fwd.entity.probs),
            g.value(fwd.relation.probs),
            tau,
            self.annotation().entity_cells(),
        )
    }

    pub fn predict_corpus(&self, corpus: &[AnnotatedSentence], tau: f64) -> Result<Vec<PredictionSet>> {
        use rayon::prelude::*;
        corpus.par_iter().map(|s| self.predict(&s.tokens, tau)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::new(
            vec!["A".into(), "B".into()],
            vec!["r".into()],
            AnnotationMode::FullSpan,
        )
        .unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig::bidarter().validate().is_ok());
        let bad = ModelConfig {
            n_layers: 3,
            ..ModelConfig::bidarter()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ModelConfig {
            n_layers: 0,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("BiDArtER".parse::<ModelVariant>().unwrap(), ModelVariant::BiDarter);
    }

    #[test]
    fn forward_shapes_for_both_variants() {
        let vocab = Vocabulary::from(vec!["<unk>".to_string(), "a".into(), "b".into()]);
        for cfg in [ModelConfig::default(), ModelConfig::bidarter()] {
            let cfg = ModelConfig {
                embed_dim: 4,
                hidden_dim: 3,
                decoder_width: 5,
                ..cfg
            };
            let m = Model::new(cfg.clone(), schema(), vocab.clone(), 1).unwrap();
            let mut g = Graph::new();
            let f = m.forward(&mut g, &toks("a b c a")).unwrap();
            assert_eq!(f.layers.len(), cfg.n_layers);
            assert_eq!(g.shape(f.entity.probs), &[4, 4, 2]);
            assert_eq!(g.shape(f.relation.probs), &[4, 4, 1]);
            assert_eq!(
                m.decoder_params().streams * 2 * 3,
                m.params.get("ner.w_h").unwrap().shape()[0]
            );
        }
    }

    #[test]
    fn entity_mask_follows_annotation_mode() {
        let vocab = Vocabulary::build(std::iter::empty());
        let m = Model::new(ModelConfig::default(), schema(), vocab.clone(), 1).unwrap();
        let mask = m.entity_mask(3);
        assert_eq!(mask.sum(), 6.0 * 2.0);
        assert_eq!(mask.get(&[2, 0, 1]), 0.0);

        let mut tail = schema();
        tail.annotation = AnnotationMode::TailOnly;
        let m = Model::new(ModelConfig::default(), tail, vocab.clone(), 1).unwrap();
        assert_eq!(m.entity_mask(3).sum(), 3.0 * 2.0);

        let cfg = ModelConfig {
            mask_reversed_spans: false,
            ..ModelConfig::default()
        };
        let m = Model::new(cfg, schema(), vocab, 1).unwrap();
        assert_eq!(m.entity_mask(3).sum(), 9.0 * 2.0);
    }

    #[test]
    fn from_parts_rejects_mismatched_tensors() {
        let vocab = Vocabulary::build(std::iter::empty());
        let m = Model::new(ModelConfig::default(), schema(), vocab.clone(), 1).unwrap();
        let back = Model::from_parts(m.config.clone(), m.schema.clone(), vocab.clone(), m.params.clone()).unwrap();
        assert_eq!(back, m);
        let wider = ModelConfig {
            hidden_dim: 8,
            ..ModelConfig::default()
        };
        assert!(Model::from_parts(wider, m.schema.clone(), vocab, m.params.clone()).is_err());
    }
}
