//! Hyperparameter search over aggregation coefficients and loss weights on
//! the synthetic corpus. The default grid has 81 points; pass `small` for a
//! 4-point grid that finishes in seconds.
//!
//!     cargo run --release --example grid_search -- [small|full] [epochs]

use std::path::Path;
use std::time::Instant;

use darter::corpus::{load_corpus, LabelSchema};
use darter::training::{grid_search, HyperGrid, TrainConfig};

fn main() -> darter::Result<()> {
    let mut args = std::env::args().skip(1);
    let full = args.next().as_deref() == Some("full");
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic");
    let schema = LabelSchema::load(dir.join("schema.json"))?;
    let train_set = load_corpus(dir.join("train.jsonl"), &schema)?;
    let dev = load_corpus(dir.join("dev.jsonl"), &schema)?;

    let grid = if full {
        HyperGrid::default()
    } else {
        HyperGrid {
            alpha: vec![1.0],
            beta: vec![0.5, 1.0],
            gamma: vec![1.0],
            delta: vec![0.75, 1.0],
        }
    };
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let result = grid_search(&train_set, &dev, &schema, &cfg, &grid)?;
    println!("{:>6} {:>6} {:>6} {:>6}  {:>6} {:>6}", "alpha", "beta", "gamma", "delta", "RE F1", "NER F1");
    for row in &result.rows {
        let p = row.point;
        println!(
            "{:>6} {:>6} {:>6} {:>6}  {:>6.3} {:>6.3}",
            p.alpha, p.beta, p.gamma, p.delta, row.score.re_f1, row.score.ner_f1
        );
    }
    println!("best: {:?} in {:.1}s", result.best, start.elapsed().as_secs_f64());
    Ok(())
}
