//! The full train / checkpoint / evaluate / predict cycle through the same
//! entry points the command-line tool uses, with outputs in a scratch
//! directory.
//!
//!     cargo run --release --example pipeline -- [epochs]

use std::path::Path;

use darter::cli::{cmd_eval, cmd_predict, cmd_train, RunConfig};

fn main() -> darter::Result<()> {
    let epochs: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic");
    let scratch = std::env::temp_dir().join(format!("darter-pipeline-{}", std::process::id()));

    let mut cfg = RunConfig::load(data.join("run.toml"))?;
    cfg.train.epochs = epochs;
    cfg.paths.checkpoint = Some(scratch.join("model.json"));
    cfg.paths.history = None;
    cfg.paths.out = None;

    let trained = cmd_train(&cfg)?;
    println!(
        "trained {} epochs, final loss {:.4}; checkpoint {}",
        trained.history.len(),
        trained.history.last().map_or(f64::NAN, |r| r.loss),
        trained.checkpoint.display()
    );

    cfg.paths.test = Some(data.join("dev.jsonl"));
    let report = cmd_eval(&cfg)?;
    println!("{}", report.render_text());

    for line in cmd_predict(&cfg)? {
        println!("{line}");
    }
    std::fs::remove_dir_all(&scratch).ok();
    Ok(())
}
