//! Trains the same model with and without encoder interaction and with and
//! without subject/object features in the relation head, then compares dev
//! scores.
//!
//!     cargo run --release --example ablations -- [epochs]

use std::path::Path;

use darter::corpus::{load_corpus, LabelSchema};
use darter::eval::{score_corpus, MatchMode};
use darter::training::{train, LossWeights, TrainConfig};
use darter::ModelConfig;

fn main() -> darter::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic");
    let schema = LabelSchema::load(dir.join("schema.json"))?;
    let train_set = load_corpus(dir.join("train.jsonl"), &schema)?;
    let dev = load_corpus(dir.join("dev.jsonl"), &schema)?;

    for (interaction, entity_features_in_re) in [(true, true), (false, true), (true, false), (false, false)] {
        let cfg = TrainConfig {
            epochs,
            model: ModelConfig {
                interaction,
                entity_features_in_re,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        };
        let (model, _) = train(&train_set, &schema, &cfg, LossWeights::default())?;
        let (ner, re) = score_corpus(&dev, &model.predict_corpus(&dev, cfg.threshold)?, MatchMode::Exact)?;
        println!(
            "interaction {interaction:<5}  entity features in RE {entity_features_in_re:<5}  NER F1 {:.3}  RE F1 {:.3}",
            ner.f1, re.f1
        );
    }
    Ok(())
}
