//! Compares analytic gradients with finite differences on random small
//! models and prints the worst relative error under several denominator
//! floors.
//!
//!     cargo run --release --example gradient_check -- [configs] [step] [3|5]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use darter::corpus::{AnnotatedSentence, AnnotationMode, Entity, LabelSchema, Relation, Vocabulary};
use darter::gradcheck::{check_gradients, relative_error, GradCheckOptions, Stencil};
use darter::training::LossWeights;
use darter::{Model, ModelConfig, ModelVariant};

fn random_model(rng: &mut ChaCha8Rng, n: usize) -> (Model, AnnotatedSentence) {
    let (variant, n_layers) = [(ModelVariant::Darter, 1), (ModelVariant::Darter, 2), (ModelVariant::BiDarter, 2)][n % 3];
    let (u, v) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
    let schema = LabelSchema::new(
        (0..u).map(|k| format!("E{k}")).collect(),
        (0..v).map(|l| format!("R{l}")).collect(),
        AnnotationMode::FullSpan,
    )
    .unwrap();
    let t = rng.gen_range(1..=5);
    let words = ["a", "b", "c", "d"];
    let tokens: Vec<String> = (0..t).map(|_| words.choose(rng).unwrap().to_string()).collect();
    let mut s = AnnotatedSentence::unlabeled(tokens, AnnotationMode::FullSpan);
    let end = rng.gen_range(0..t);
    s.entities.push(Entity { start: rng.gen_range(0..=end), end, label: rng.gen_range(0..u) });
    s.relations.push(Relation { subject: 0, object: 0, label: rng.gen_range(0..v) });
    let config = ModelConfig {
        variant,
        n_layers,
        embed_dim: rng.gen_range(1..=8),
        hidden_dim: rng.gen_range(1..=8),
        decoder_width: rng.gen_range(2..=8),
        ..ModelConfig::default()
    };
    let mut model = Model::new(config, schema, Vocabulary::build([&s]), rng.gen()).unwrap();
    for (_, t) in model.params.iter_mut() {
        for x in t.data_mut() {
            *x += rng.gen_range(-0.3..0.3);
        }
    }
    (model, s)
}

fn main() -> darter::Result<()> {
    let mut args = std::env::args().skip(1);
    let configs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let step: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let stencil = match args.next().as_deref() {
        Some("3") => Stencil::ThreePoint,
        _ => Stencil::FivePoint,
    };
    let floors = [0.0, 1e-8, 1e-6, 1e-4];
    let mut worst = vec![(0.0f64, String::new()); floors.len()];
    let mut max_abs = 0.0f64;
    let mut entries = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 0..configs {
        let (model, s) = random_model(&mut rng, n);
        let opts = GradCheckOptions {
            stencil,
            step,
            ..GradCheckOptions::default()
        };
        for e in check_gradients(&model, &s, LossWeights::default(), opts, |_, _| true)? {
            entries += 1;
            max_abs = max_abs.max((e.analytic - e.numeric).abs());
            for (slot, &floor) in worst.iter_mut().zip(&floors) {
                let r = relative_error(e.analytic, e.numeric, floor);
                if r > slot.0 {
                    *slot = (r, format!("config {n} {}[{}] analytic {:e} numeric {:e}", e.name, e.index, e.analytic, e.numeric));
                }
            }
        }
    }
    println!("{configs} configs, {entries} entries, {stencil:?} step {step:e}; max |a-n| {max_abs:.2e}");
    for ((r, at), floor) in worst.iter().zip(floors) {
        println!("floor {floor:>6.0e}: max rel error {r:.2e}  ({at})");
    }
    Ok(())
}
