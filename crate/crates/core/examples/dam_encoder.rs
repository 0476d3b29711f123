//! Runs a single encoder layer over a random sentence matrix and prints the
//! per-step raw, inter-aggregated and intra-aggregated features, then the
//! final subtask features in both directions.
//!
//!     cargo run --example dam_encoder -- [tokens] [width]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use darter::encoder::{encode_sequence, DamParams, Direction, EncoderOptions, Subtask};
use darter::graph::Graph;
use darter::params::ParamStore;
use darter::Tensor;

fn fmt_row(t: &Tensor) -> String {
    let cells: Vec<String> = t.data().iter().map(|x| format!("{x:+.3}")).collect();
    format!("[{}]", cells.join(" "))
}

fn main() -> darter::Result<()> {
    let mut args = std::env::args().skip(1);
    let t: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let d: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);

    let mut store = ParamStore::new(7);
    let layer = DamParams::register(&mut store, "enc", d, d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor::new(vec![t, d], (0..t * d).map(|_| rng.gen_range(-1.0..1.0)).collect())?;

    for direction in [Direction::LeftToRight, Direction::RightToLeft] {
        let mut g = Graph::new();
        let vars = layer.bind(&store.bind(&mut g))?;
        let xv = g.leaf(x.clone());
        let out = encode_sequence(&mut g, xv, &vars, direction, EncoderOptions::default())?;
        println!("{direction:?}");
        for step in &out.steps {
            println!("  token {}", step.token);
            for p in Subtask::ALL {
                let i = p as usize;
                println!(
                    "    {}  f {}  inter {}  a {}",
                    p.tag(),
                    fmt_row(g.value(step.f[i])),
                    fmt_row(g.value(step.inter[i])),
                    fmt_row(g.value(step.a[i])),
                );
            }
        }
        for p in Subtask::ALL {
            let h = g.value(out.h_tilde[p as usize]);
            println!("  h~_{} {:?}", p.tag(), h.shape());
            for r in 0..t {
                println!("    {}", fmt_row(&Tensor::vector(h.row(r).to_vec())));
            }
        }
    }
    Ok(())
}
