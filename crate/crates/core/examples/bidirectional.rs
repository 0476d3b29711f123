//! Trains the one-layer and the two-layer bidirectional models on the
//! synthetic corpus with the same budget and compares dev scores.
//!
//!     cargo run --release --example bidirectional -- [epochs]

use std::path::Path;
use std::time::Instant;

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

    for model in [ModelConfig::default(), ModelConfig::bidarter()] {
        let cfg = TrainConfig {
            epochs,
            model,
            ..TrainConfig::default()
        };
        let start = Instant::now();
        let (m, history) = train(&train_set, &schema, &cfg, LossWeights::default())?;
        let preds = m.predict_corpus(&dev, cfg.threshold)?;
        let (ner, re) = score_corpus(&dev, &preds, MatchMode::Exact)?;
        println!(
            "{:?} ({} layer(s), {} parameters): final loss {:.4}, dev NER F1 {:.3}, RE F1 {:.3}, {:.1}s",
            cfg.model.variant,
            cfg.model.n_layers,
            m.params.num_values(),
            history.last().map_or(f64::NAN, |r| r.loss),
            ner.f1,
            re.f1,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
