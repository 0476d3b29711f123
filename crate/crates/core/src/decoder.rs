//! Table-filling decoders.
//!
//! Both heads score every ordered token pair `(i, j)`:
//!
//! ```text
//! pair_ij = [x_i ; x_j]                      (one pair of halves per encoder stream)
//! h_ij    = ELU(Norm(pair_ij · W_h + b_h))
//! p_ij    = sigmoid(h_ij · W_out + b_out)
//! ```
//!
//! The entity head uses `x = h̃_s + h̃_o`. The relation head uses
//! `x = h̃_r + (α·h̃_o - β·h̃_s)`, or just `h̃_r` when entity features are
//! left out of relation decoding. With two streams (bidirectional
//! encoding) the pair vector is `[→x_i ; →x_j ; ←x_i ; ←x_j]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::encoder::DamOutput;
use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::params::{Bound, ParamStore};

/// Candidate values of the aggregation coefficients α and β.
pub const AGGREGATION_GRID: [f64; 3] = [-1.0, 0.5, 1.0];

/// Layer-norm epsilon used by both heads.
pub const NORM_EPS: f64 = 1e-5;

/// How subject and object features enter the relation head.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub alpha: f64,
    pub beta: f64,
    /// When false the relation head reads `h̃_r` only.
    pub entity_features: bool,
}

impl Default for Aggregation {
    fn default() -> Self {
        Aggregation {
            alpha: 1.0,
            beta: 1.0,
            entity_features: true,
        }
    }
}

impl Aggregation {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !AGGREGATION_GRID.contains(&v) {
                return Err(Error::Config(format!(
                    "{name} = {v} is not one of {AGGREGATION_GRID:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Encoder features consumed by the decoders for one stream.
#[derive(Clone, Copy, Debug)]
pub struct StreamFeatures {
    pub s: Var,
    pub r: Var,
    pub o: Var,
}

impl From<&DamOutput> for StreamFeatures {
    fn from(out: &DamOutput) -> Self {
        StreamFeatures {
            s: out.h_tilde[0],
            r: out.h_tilde[1],
            o: out.h_tilde[2],
        }
    }
}

/// Names and widths of both decoder heads.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    pub streams: usize,
    pub hidden_dim: usize,
    pub width: usize,
    pub entity_types: usize,
    pub relation_types: usize,
    /// Store positions, `[ner, re][HEAD_FIELDS]`.
    slots: [[usize; 6]; 2],
}

const HEAD_FIELDS: [&str; 6] = ["w_h", "b_h", "norm_gain", "norm_bias", "w_out", "b_out"];

impl DecoderParams {
    /// Registers `ner.*` and `re.*`: weights uniform in `±1/sqrt(hidden_dim)`,
    /// biases zero, norm gain one.
    pub fn register(
        store: &mut ParamStore,
        streams: usize,
        hidden_dim: usize,
        width: usize,
        entity_types: usize,
        relation_types: usize,
    ) -> Result<Self> {
        if streams == 0 || entity_types == 0 || relation_types == 0 {
            return Err(Error::contract("decoder needs ≥1 stream and ≥1 label per head"));
        }
        if width < 2 {
            return Err(Error::contract("decoder width must be at least 2 for normalization"));
        }
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let input = 2 * streams * hidden_dim;
        let mut slots = [[0; 6]; 2];
        for ((head, out), s) in [("ner", entity_types), ("re", relation_types)].into_iter().zip(&mut slots) {
            *s = [
                store.uniform(format!("{head}.w_h"), &[input, width], bound)?,
                store.zeros(format!("{head}.b_h"), &[width])?,
                store.ones(format!("{head}.norm_gain"), &[width])?,
                store.zeros(format!("{head}.norm_bias"), &[width])?,
                store.uniform(format!("{head}.w_out"), &[width, out], bound)?,
                store.zeros(format!("{head}.b_out"), &[out])?,
            ];
        }
        Ok(DecoderParams {
            streams,
            hidden_dim,
            width,
            entity_types,
            relation_types,
            slots,
        })
    }

    pub fn head_names(head: &str) -> Vec<String> {
        HEAD_FIELDS.iter().map(|f| format!("{head}.{f}")).collect()
    }

    pub fn bind(&self, bound: &Bound) -> Result<DecoderVars> {
        let head = |h: usize| -> Result<HeadVars> {
            let v = |k: usize| bound.get(self.slots[h][k]);
            Ok(HeadVars {
                w_h: v(0)?,
                b_h: v(1)?,
                norm_gain: v(2)?,
                norm_bias: v(3)?,
                w_out: v(4)?,
                b_out: v(5)?,
            })
        };
        Ok(DecoderVars {
            ner: head(0)?,
            re: head(1)?,
            streams: self.streams,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    pub w_h: Var,
    pub b_h: Var,
    pub norm_gain: Var,
    pub norm_bias: Var,
    pub w_out: Var,
    pub b_out: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct DecoderVars {
    pub ner: HeadVars,
    pub re: HeadVars,
    pub streams: usize,
}

/// Entity probabilities, shape `[t, t, u]`.
#[derive(Clone, Copy, Debug)]
pub struct EntityLogits {
    pub probs: Var,
}

/// Relation probabilities, shape `[t, t, v]`.
#[derive(Clone, Copy, Debug)]
pub struct RelationLogits {
    pub probs: Var,
}

/// Scores every token pair from per-stream token features `[t×d_h]`.
fn pair_table(g: &mut Graph, features: &[Var], head: &HeadVars) -> Result<Var> {
    let t = g.shape(features[0])[0];
    let mut heads = Vec::with_capacity(t * t);
    let mut tails = Vec::with_capacity(t * t);
    for i in 0..t {
        for j in 0..t {
            heads.push(i);
            tails.push(j);
        }
    }
    let mut parts = Vec::with_capacity(2 * features.len());
    for &f in features {
        parts.push(g.gather_rows(f, &heads)?);
        parts.push(g.gather_rows(f, &tails)?);
    }
    let pairs = g.concat(&parts, 1)?;
    let hidden = g.matmul(pairs, head.w_h)?;
    let hidden = g.add_row(hidden, head.b_h)?;
    let hidden = g.layer_norm(hidden, head.norm_gain, head.norm_bias, NORM_EPS)?;
    let hidden = g.elu(hidden)?;
    let logits = g.matmul(hidden, head.w_out)?;
    let logits = g.add_row(logits, head.b_out)?;
    let probs = g.sigmoid(logits)?;
    let labels = g.shape(probs)[1];
    g.reshape(probs, &[t, t, labels])
}

fn check_streams(g: &Graph, streams: &[StreamFeatures], vars: &DecoderVars) -> Result<()> {
    if streams.len() != vars.streams {
        return Err(Error::contract(format!(
            "decoder built for {} stream(s), got {}",
            vars.streams,
            streams.len()
        )));
    }
    let reference = g.shape(streams[0].s).to_vec();
    for st in streams {
        for v in [st.s, st.r, st.o] {
            if g.shape(v) != reference.as_slice() {
                return Err(Error::dim("decoder", &reference, g.shape(v)));
            }
        }
    }
    Ok(())
}

/// Entity span probabilities from `h̃_s + h̃_o` of each stream.
pub fn ner_decode(g: &mut Graph, streams: &[StreamFeatures], vars: &DecoderVars) -> Result<EntityLogits> {
    check_streams(g, streams, vars)?;
    let mut feats = Vec::with_capacity(streams.len());
    for st in streams {
        feats.push(g.add(st.s, st.o)?);
    }
    Ok(EntityLogits {
        probs: pair_table(g, &feats, &vars.ner)?,
    })
}

/// Relation head-pair probabilities from the aggregated relation features.
pub fn re_decode(
    g: &mut Graph,
    streams: &[StreamFeatures],
    vars: &DecoderVars,
    agg: Aggregation,
) -> Result<RelationLogits> {
    check_streams(g, streams, vars)?;
    let mut feats = Vec::with_capacity(streams.len());
    for st in streams {
        let r = if agg.entity_features {
            let ao = g.scale(st.o, agg.alpha);
            let bs = g.scale(st.s, agg.beta);
            let diff = g.sub(ao, bs)?;
            g.add(st.r, diff)?
        } else {
            st.r
        };
        feats.push(r);
    }
    Ok(RelationLogits {
        probs: pair_table(g, &feats, &vars.re)?,
    })
}

/// Both heads over any number of streams.
pub fn decode(
    g: &mut Graph,
    streams: &[StreamFeatures],
    vars: &DecoderVars,
    agg: Aggregation,
) -> Result<(EntityLogits, RelationLogits)> {
    Ok((ner_decode(g, streams, vars)?, re_decode(g, streams, vars, agg)?))
}

/// Bidirectional decoding: exactly a forward and a backward stream.
pub fn bi_decode(
    g: &mut Graph,
    outputs: &[DamOutput],
    vars: &DecoderVars,
    agg: Aggregation,
) -> Result<(EntityLogits, RelationLogits)> {
    if outputs.len() != 2 {
        return Err(Error::contract(format!(
            "bidirectional decoding needs 2 directional streams, got {}",
            outputs.len()
        )));
    }
    let streams: Vec<StreamFeatures> = outputs.iter().map(StreamFeatures::from).collect();
    decode(g, &streams, vars, agg)
}

/// `(start, end, label)` with `start <= end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

/// `(subject position, object position, label)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationHead {
    pub subject: usize,
    pub object: usize,
    pub label: usize,
}

/// Deduplicated predictions (or gold annotations) of one sentence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub entities: BTreeSet<EntitySpan>,
    pub relations: BTreeSet<RelationHead>,
}

impl PredictionSet {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }
}

/// Which cells of the entity table can hold an entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityCells {
    /// Full spans: `i <= j`.
    UpperTriangle,
    /// Tail-only annotation: `i == j`.
    Diagonal,
}

impl EntityCells {
    pub fn admits(self, i: usize, j: usize) -> bool {
        match self {
            EntityCells::UpperTriangle => i <= j,
            EntityCells::Diagonal => i == j,
        }
    }
}

/// Cells strictly above `tau` become predictions.
pub fn threshold_predictions(
    entities: &crate::tensor::Tensor,
    relations: &crate::tensor::Tensor,
    tau: f64,
    cells: EntityCells,
) -> Result<PredictionSet> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::contract(format!("threshold {tau} outside (0, 1)")));
    }
    let mut out = PredictionSet::default();
    let es = entities.shape();
    if es.len() != 3 || es[0] != es[1] {
        return Err(Error::contract(format!("entity table must be [t, t, u], got {es:?}")));
    }
    let rs = relations.shape();
    if rs.len() != 3 || rs[0] != rs[1] || rs[0] != es[0] {
        return Err(Error::dim("threshold_predictions", es, rs));
    }
    let (t, u, v) = (es[0], es[2], rs[2]);
    for i in 0..t {
        for j in 0..t {
            if cells.admits(i, j) {
                for k in 0..u {
                    if entities.data()[(i * t + j) * u + k] > tau {
                        out.entities.insert(EntitySpan {
                            start: i,
                            end: j,
                            label: k,
                        });
                    }
                }
            }
            for l in 0..v {
                if relations.data()[(i * t + j) * v + l] > tau {
                    out.relations.insert(RelationHead {
                        subject: i,
                        object: j,
                        label: l,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{elu, sigmoid};
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn randomize(store: &mut ParamStore, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t) in store.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.8..0.8));
        }
    }

    /// Straight-line reference of one head: `feats[k][token][dim]`.
    fn oracle_head(store: &ParamStore, head: &str, feats: &[Vec<Vec<f64>>]) -> Vec<f64> {
        let p = |f: &str| store.get(&format!("{head}.{f}")).unwrap().clone();
        let (w_h, b_h, gain, bias, w_out, b_out) =
            (p("w_h"), p("b_h"), p("norm_gain"), p("norm_bias"), p("w_out"), p("b_out"));
        let t = feats[0].len();
        let width = b_h.len();
        let labels = b_out.len();
        let mut out = Vec::new();
        for i in 0..t {
            for j in 0..t {
                let mut pair = Vec::new();
                for f in feats {
                    pair.extend_from_slice(&f[i]);
                    pair.extend_from_slice(&f[j]);
                }
                let pre: Vec<f64> = (0..width)
                    .map(|c| b_h.data()[c] + pair.iter().enumerate().map(|(k, x)| x * w_h.get(&[k, c])).sum::<f64>())
                    .collect();
                let mean = pre.iter().sum::<f64>() / width as f64;
                let var = pre.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / width as f64;
                let hid: Vec<f64> = pre
                    .iter()
                    .enumerate()
                    .map(|(c, x)| elu((x - mean) / (var + NORM_EPS).sqrt() * gain.data()[c] + bias.data()[c]))
                    .collect();
                for l in 0..labels {
                    let z = b_out.data()[l] + hid.iter().enumerate().map(|(c, h)| h * w_out.get(&[c, l])).sum::<f64>();
                    out.push(sigmoid(z));
                }
            }
        }
        out
    }

    fn rows(t: &Tensor) -> Vec<Vec<f64>> {
        (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
    }

    fn setup(streams: usize, d_h: usize, u: usize, v: usize, seed: u64) -> (ParamStore, DecoderParams) {
        let mut store = ParamStore::new(seed);
        let p = DecoderParams::register(&mut store, streams, d_h, d_h.max(2), u, v).unwrap();
        randomize(&mut store, seed + 1);
        (store, p)
    }

    #[test]
    fn zero_model_gives_one_half_everywhere() {
        let (mut store, p) = setup(1, 3, 2, 2, 1);
        store.zero_all();
        let mut g = Graph::new();
        let vars = p.bind(&store.bind(&mut g)).unwrap();
        let z = g.leaf(Tensor::zeros(&[3, 3]));
        let st = [StreamFeatures { s: z, r: z, o: z }];
        let (e, r) = decode(&mut g, &st, &vars, Aggregation::default()).unwrap();
        assert!(g.value(e.probs).data().iter().all(|&x| x == 0.5));
        assert!(g.value(r.probs).data().iter().all(|&x| x == 0.5));
        assert_eq!(g.shape(e.probs), &[3, 3, 2]);
        let preds = threshold_predictions(g.value(e.probs), g.value(r.probs), 0.5, EntityCells::UpperTriangle).unwrap();
        assert!(preds.is_empty());
    }

    #[test]
    fn single_token_gives_one_cell() {
        let (store, p) = setup(1, 3, 2, 1, 2);
        let mut g = Graph::new();
        let vars = p.bind(&store.bind(&mut g)).unwrap();
        let x = g.leaf(Tensor::matrix(&[&[0.2, -0.1, 0.4]]).unwrap());
        let st = [StreamFeatures { s: x, r: x, o: x }];
        let e = ner_decode(&mut g, &st, &vars).unwrap();
        assert_eq!(g.shape(e.probs), &[1, 1, 2]);
    }

    #[test]
    fn unidirectional_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (store, p) = setup(1, 4, 3, 2, 3);
        let (ts, tr, to) = (random(&mut rng, &[3, 4]), random(&mut rng, &[3, 4]), random(&mut rng, &[3, 4]));
        let mut g = Graph::new();
        let vars = p.bind(&store.bind(&mut g)).unwrap();
        let st = [StreamFeatures {
            s: g.leaf(ts.clone()),
            r: g.leaf(tr.clone()),
            o: g.leaf(to.clone()),
        }];
        let agg = Aggregation {
            alpha: 0.5,
            beta: -1.0,
            entity_features: true,
        };
        let (e, r) = decode(&mut g, &st, &vars, agg).unwrap();
        let he = ts.zip_map(&to, |a, b| a + b).unwrap();
        let hr = tr
            .zip_map(&to.zip_map(&ts, |o, s| 0.5 * o - (-1.0) * s).unwrap(), |a, b| a + b)
            .unwrap();
        let oe = oracle_head(&store, "ner", &[rows(&he)]);
        let or = oracle_head(&store, "re", &[rows(&hr)]);
        for (a, b) in g.value(e.probs).data().iter().zip(&oe) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g.value(r.probs).data().iter().zip(&or) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cancellation_leaves_relation_features_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (store, p) = setup(1, 3, 1, 2, 4);
        let (tso, tr) = (random(&mut rng, &[4, 3]), random(&mut rng, &[4, 3]));
        let mut g = Graph::new();
        let vars = p.bind(&store.bind(&mut g)).unwrap();
        let (so, r) = (g.leaf(tso), g.leaf(tr));
        let st = [StreamFeatures { s: so, r, o: so }];
        let with = re_decode(&mut g, &st, &vars, Aggregation::default()).unwrap();
        let without = re_decode(
            &mut g,
            &st,
            &vars,
            Aggregation {
                entity_features: false,
                ..Aggregation::default()
            },
        )
        .unwrap();
        assert_eq!(g.value(with.probs), g.value(without.probs));
    }

    #[test]
    fn bidirectional_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (store, p) = setup(2, 3, 2, 2, 9);
        let f: Vec<Tensor> = (0..6).map(|_| random(&mut rng, &[3, 3])).collect();
        let mut g = Graph::new();
        let vars = p.bind(&store.bind(&mut g)).unwrap();
        let v: Vec<Var> = f.iter().map(|t| g.leaf(t.clone())).collect();
        let st = [
            StreamFeatures { s: v[0], r: v[1], o: v[2] },
            StreamFeatures { s: v[3], r: v[4], o: v[5] },
        ];
        let agg = Aggregation {
            alpha: -1.0,
            beta: 0.5,
            entity_features: true,
        };
        let (e, r) = decode(&mut g, &st, &vars, agg).unwrap();
        let he = |k: usize| rows(&f[3 * k].zip_map(&f[3 * k + 2], |a, b| a + b).unwrap());
        let hr = |k: usize| {
            let ent = f[3 * k + 2].zip_map(&f[3 * k], |o, s| -o - 0.5 * s).unwrap();
            rows(&f[3 * k + 1].zip_map(&ent, |a, b| a + b).unwrap())
        };
        let oe = oracle_head(&store, "ner", &[he(0), he(1)]);
        let or = oracle_head(&store, "re", &[hr(0), hr(1)]);
        for (a, b) in g.value(e.probs).data().iter().zip(&oe) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g.value(r.probs).data().iter().zip(&or) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Identical directional streams with the projection tiled as
    /// `[W_top; W_bot; W_top; W_bot]` doubles the unidirectional pre-activation.
    #[test]
    fn tiled_bidirectional_doubles_preactivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d_h = 3;
        let (uni_store, uni) = setup(1, d_h, 2, 2, 20);
        let mut bi_store = ParamStore::new(0);
        let bi = DecoderParams::register(&mut bi_store, 2, d_h, d_h, 2, 2).unwrap();
        for (name, t) in uni_store.iter() {
            if name.ends_with("w_h") {
                let mut tiled = t.data().to_vec();
                tiled.extend_from_slice(t.data());
                let rows = t.shape()[0] * 2;
                bi_store.set(name, Tensor::new(vec![rows, t.shape()[1]], tiled).unwrap()).unwrap();
            } else {
                bi_store.set(name, t.clone()).unwrap();
            }
        }
        // Same pre-activation as a unidirectional head fed doubled features.
        let (ts, tr, to) = (random(&mut rng, &[3, d_h]), random(&mut rng, &[3, d_h]), random(&mut rng, &[3, d_h]));
        let mut g = Graph::new();
        let uv = uni.bind(&uni_store.bind(&mut g)).unwrap();
        let bv = bi.bind(&bi_store.bind(&mut g)).unwrap();
        let (s, r, o) = (g.leaf(ts.clone()), g.leaf(tr.clone()), g.leaf(to.clone()));
        let (s2, r2, o2) = (g.leaf(ts.scale(2.0)), g.leaf(tr.scale(2.0)), g.leaf(to.scale(2.0)));
        let stream = StreamFeatures { s, r, o };
        let (eb, rb) = decode(&mut g, &[stream, stream], &bv, Aggregation::default()).unwrap();
        let (eu, ru) = decode(&mut g, &[StreamFeatures { s: s2, r: r2, o: o2 }], &uv, Aggregation::default()).unwrap();
        for (a, b) in g.value(eb.probs).data().iter().zip(g.value(eu.probs).data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in g.value(rb.probs).data().iter().zip(g.value(ru.probs).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_count_is_checked() {
        let (store, p) = setup(2, 3, 1, 1, 1);
        let mut g = Graph::new();
        let vars = p.bind(&store.bind(&mut g)).unwrap();
        let z = g.leaf(Tensor::zeros(&[2, 3]));
        let st = [StreamFeatures { s: z, r: z, o: z }];
        assert!(matches!(ner_decode(&mut g, &st, &vars), Err(Error::Contract(_))));
        let bad = g.leaf(Tensor::zeros(&[3, 3]));
        let st = [StreamFeatures { s: z, r: z, o: z }, StreamFeatures { s: z, r: bad, o: z }];
        assert!(matches!(re_decode(&mut g, &st, &vars, Aggregation::default()), Err(Error::Dimension { .. })));
        assert!(bi_decode(&mut g, &[], &vars, Aggregation::default()).is_err());
    }

    #[test]
    fn threshold_is_strict_and_masks_reversed_spans() {
        let mut e = Tensor::full(&[3, 3, 2], 0.5);
        let r = Tensor::full(&[3, 3, 1], 0.5);
        e.set(&[0, 1, 1], 0.51);
        e.set(&[2, 0, 0], 0.99);
        let p = threshold_predictions(&e, &r, 0.5, EntityCells::UpperTriangle).unwrap();
        assert_eq!(
            p.entities.into_iter().collect::<Vec<_>>(),
            vec![EntitySpan { start: 0, end: 1, label: 1 }]
        );
        assert!(p.relations.is_empty());
        let p = threshold_predictions(&e, &r, 0.5, EntityCells::Diagonal).unwrap();
        assert!(p.entities.is_empty());
        assert!(threshold_predictions(&e, &r, 1.0, EntityCells::Diagonal).is_err());
    }

    #[test]
    fn aggregation_grid_is_enforced() {
        assert!(Aggregation::default().validate().is_ok());
        let bad = Aggregation {
            alpha: 0.0,
            ..Aggregation::default()
        };
        assert!(bad.validate().is_err());
    }
}
