//! Scores a hand-built prediction set against a small gold corpus and prints
//! the full report: micro and macro scores, the out-of-triple / in-triple
//! split, per-type scores and the error taxonomy, under both match modes.
//!
//!     cargo run --example evaluation_report -- [--json]

use std::path::Path;

use darter::corpus::{load_corpus, LabelSchema};
use darter::decoder::{EntitySpan, RelationHead};
use darter::eval::report;
use darter::{MatchMode, PredictionSet};

fn main() -> darter::Result<()> {
    let json = std::env::args().any(|a| a == "--json");
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic");
    let schema = LabelSchema::load(dir.join("schema.json"))?;
    let gold = load_corpus(dir.join("dev.jsonl"), &schema)?;

    // Start from the gold sets, then drop one entity, relabel one relation
    // and add a spurious span so that every error category shows up.
    let mut preds: Vec<PredictionSet> = gold.iter().map(|s| s.gold_set()).collect();
    if let Some(first) = preds.iter_mut().find(|p| !p.entities.is_empty()) {
        first.entities.pop_last();
    }
    if let Some(p) = preds.iter_mut().find(|p| !p.relations.is_empty()) {
        let mut rel = p.relations.pop_first().expect("non-empty");
        rel.label = (rel.label + 1) % schema.num_relation_types();
        p.relations.insert(rel);
    }
    if let Some(last) = preds.last_mut() {
        last.entities.insert(EntitySpan { start: 0, end: 0, label: 0 });
        last.relations.insert(RelationHead { subject: 0, object: 0, label: 0 });
    }

    for mode in [MatchMode::Exact, MatchMode::TailOnly] {
        let r = report(&gold, &preds, &schema, mode)?;
        if json {
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        } else {
            println!("{}", r.render_text());
        }
    }
    Ok(())
}
