//! Trains on the bundled synthetic corpus until it is memorized, printing
//! training-set F1 every few epochs.
//!
//!     cargo run --release --example overfit_synthetic -- [darter|bidarter] [max_epochs]

use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use darter::corpus::{load_corpus, LabelSchema, Vocabulary};
use darter::eval::{score_corpus, MatchMode};
use darter::training::{train_model_with, LossWeights, TrainConfig};
use darter::{Model, ModelConfig, ModelVariant};

fn main() -> darter::Result<()> {
    let mut args = std::env::args().skip(1);
    let variant: ModelVariant = args.next().as_deref().unwrap_or("darter").parse()?;
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic");
    let schema = LabelSchema::load(dir.join("schema.json"))?;
    let corpus = load_corpus(dir.join("train.jsonl"), &schema)?;
    let cfg = TrainConfig {
        epochs,
        model: match variant {
            ModelVariant::Darter => ModelConfig::default(),
            ModelVariant::BiDarter => ModelConfig::bidarter(),
        },
        ..TrainConfig::default()
    };
    let mut model = Model::new(cfg.model.clone(), schema, Vocabulary::build(&corpus), cfg.seed)?;
    println!("{variant:?}: {} sentences, {} parameters", corpus.len(), model.params.num_values());

    let start = Instant::now();
    let mut memorized = None;
    train_model_with(&mut model, &corpus, &cfg, LossWeights::default(), |rec, m| {
        if rec.epoch % 5 != 0 {
            return ControlFlow::Continue(());
        }
        let preds = m.predict_corpus(&corpus, cfg.threshold).expect("corpus was validated");
        let (ner, re) = score_corpus(&corpus, &preds, MatchMode::Exact).expect("aligned");
        println!(
            "epoch {:4}  loss {:10.4}  NER F1 {:.4}  RE F1 {:.4}  {:6.1}s",
            rec.epoch,
            rec.loss,
            ner.f1,
            re.f1,
            start.elapsed().as_secs_f64()
        );
        if ner.f1 == 1.0 && re.f1 == 1.0 {
            memorized = Some(rec.epoch);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    match memorized {
        Some(e) => println!("memorized after {e} epochs"),
        None => println!("not memorized within {epochs} epochs"),
    }
    Ok(())
}
