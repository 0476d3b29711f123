//! Joint entity and relation extraction with decoupled subject, relation and
//! object recurrent cells.
//!
//! The pipeline is: token embeddings ([`corpus::embed`]) feed one or more
//! encoder layers ([`encoder`]); their hidden streams feed two table-filling
//! heads ([`decoder`]) that score every token pair for entity spans and
//! relation anchors. [`training`] fits the model with a weighted sum of the
//! two binary cross-entropies, [`eval`] scores predictions, and [`cli`]
//! wires it all behind the `darter` binary.
//!
//! Everything is `f64` and differentiated by the small tape in [`graph`].

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod model;
pub mod params;
pub mod tensor;
pub mod training;

pub use corpus::{AnnotatedSentence, AnnotationMode, LabelSchema, Vocabulary};
pub use decoder::PredictionSet;
pub use error::{Error, Result};
pub use eval::{EvalReport, MatchMode, Prf1};
pub use model::{Model, ModelConfig, ModelVariant};
pub use tensor::Tensor;
pub use training::{LossWeights, TrainConfig};
