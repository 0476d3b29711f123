//! Joint objective, optimizer loop and hyperparameter sweep.

use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, LabelSchema, Vocabulary};
use crate::decoder::{EntityLogits, RelationLogits, AGGREGATION_GRID};
use crate::error::{Error, Result};
use crate::eval::{score_corpus, MatchMode};
use crate::graph::{Graph, Var};
use crate::model::{Forward, Model, ModelConfig};
use crate::params::ParamStore;
use crate::tensor::Tensor;

/// Candidate values of the loss weights γ and δ.
pub const LOSS_WEIGHT_GRID: [f64; 3] = [0.75, 0.85, 1.0];

/// `L = γ·L_ner + δ·L_re`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { gamma: 1.0, delta: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.delta >= 0.0 && self.gamma.is_finite() && self.delta.is_finite()) {
            return Err(Error::Config(format!(
                "loss weights must be finite and non-negative, got γ={} δ={}",
                self.gamma, self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Sentences per optimizer step.
    pub batch_size: usize,
    /// Probability floor applied before the logarithms.
    pub clamp_eps: f64,
    /// Decision threshold used when scoring.
    pub threshold: f64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 500,
            seed: 42,
            batch_size: 1,
            clamp_eps: 1e-7,
            threshold: 0.5,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} is invalid", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps <= 1e-3) {
            return Err(Error::Config(format!("clamp_eps {} outside (0, 1e-3]", self.clamp_eps)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        self.model.validate()
    }
}

/// Summed masked binary cross-entropy.
pub fn bce_loss(g: &mut Graph, probs: Var, gold: &Tensor, mask: &Tensor, eps: f64) -> Result<Var> {
    g.bce(probs, gold, mask, eps)
}

/// The three scalars of the joint objective.
#[derive(Clone, Copy, Debug)]
pub struct JointLoss {
    pub total: Var,
    pub ner: Var,
    pub re: Var,
}

/// `γ·L_ner + δ·L_re` for one sentence.
pub fn joint_loss(
    g: &mut Graph,
    model: &Model,
    entity: EntityLogits,
    relation: RelationLogits,
    gold: &AnnotatedSentence,
    weights: LossWeights,
    eps: f64,
) -> Result<JointLoss> {
    let t = gold.len();
    let (ent_gold, rel_gold) = gold.to_gold_tables(&model.schema);
    let ner = bce_loss(g, entity.probs, &ent_gold, &model.entity_mask(t), eps)?;
    let re = bce_loss(g, relation.probs, &rel_gold, &model.relation_mask(t), eps)?;
    let wn = g.scale(ner, weights.gamma);
    let wr = g.scale(re, weights.delta);
    let total = g.add(wn, wr)?;
    Ok(JointLoss { total, ner, re })
}

/// Forward pass plus joint loss on a fresh record.
pub fn sentence_loss(
    model: &Model,
    sentence: &AnnotatedSentence,
    weights: LossWeights,
    eps: f64,
) -> Result<(Graph, Forward, JointLoss)> {
    let mut g = Graph::new();
    let fwd = model.forward(&mut g, &sentence.tokens)?;
    let loss = joint_loss(&mut g, model, fwd.entity, fwd.relation, sentence, weights, eps)?;
    Ok((g, fwd, loss))
}

/// Loss value and per-parameter gradients (store order) for one sentence.
pub fn sentence_gradients(
    model: &Model,
    sentence: &AnnotatedSentence,
    weights: LossWeights,
    eps: f64,
) -> Result<(f64, Vec<Tensor>)> {
    let (g, fwd, loss) = sentence_loss(model, sentence, weights, eps)?;
    let value = g.value(loss.total).item()?;
    let mut grads = g.backward(loss.total)?;
    let out = fwd
        .bound
        .params
        .vars()
        .iter()
        .zip(model.params.iter())
        .map(|(v, (_, t))| grads.take(*v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((value, out))
}

/// Adaptive-moment optimizer.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(learning_rate: f64, params: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((_, p), g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                p[i] -= self.learning_rate * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Mean per-sentence loss observed during one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
}

/// Trains `model` in place and returns the loss history.
///
/// Sentences are shuffled each epoch with a generator seeded from
/// `config.seed`; per-sentence gradients of a batch are computed in parallel
/// and summed in batch order, so results do not depend on thread count.
pub fn train_model(
    model: &mut Model,
    corpus: &[AnnotatedSentence],
    config: &TrainConfig,
    weights: LossWeights,
) -> Result<Vec<EpochRecord>> {
    train_model_with(model, corpus, config, weights, |_, _| ControlFlow::Continue(()))
}

/// As [`train_model`], calling `on_epoch` after every epoch. Returning
/// `Break` stops training after that epoch.
pub fn train_model_with(
    model: &mut Model,
    corpus: &[AnnotatedSentence],
    config: &TrainConfig,
    weights: LossWeights,
    mut on_epoch: impl FnMut(&EpochRecord, &Model) -> ControlFlow<()>,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    weights.validate()?;
    if corpus.is_empty() {
        return Err(Error::contract("training corpus is empty"));
    }
    for (n, s) in corpus.iter().enumerate() {
        s.check(&model.schema).map_err(|(field, message)| Error::Validation {
            path: "<training corpus>".into(),
            line: n + 1,
            field,
            message,
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.learning_rate, &model.params);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            step += 1;
            let frozen: &Model = model;
            let results: Vec<Result<(f64, Vec<Tensor>)>> = batch
                .par_iter()
                .map(|&i| sentence_gradients(frozen, &corpus[i], weights, config.clamp_eps))
                .collect();
            let scale = 1.0 / batch.len() as f64;
            let mut sum: Option<Vec<Tensor>> = None;
            for r in results {
                let (loss, grads) = r.map_err(|e| match e {
                    Error::NonFinite(_) => Error::Divergence {
                        epoch,
                        step,
                        loss: f64::NAN,
                    },
                    other => other,
                })?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, step, loss });
                }
                epoch_loss += loss;
                match &mut sum {
                    None => sum = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            a.add_assign(g)?;
                        }
                    }
                }
            }
            let grads: Vec<Tensor> = sum
                .expect("non-empty batch")
                .into_iter()
                .map(|t| t.scale(scale))
                .collect();
            adam.step(&mut model.params, &grads);
        }
        let rec = EpochRecord {
            epoch,
            loss: epoch_loss / corpus.len() as f64,
        };
        log::debug!("epoch {epoch}: loss {:.6}", rec.loss);
        history.push(rec);
        if on_epoch(&rec, model).is_break() {
            break;
        }
    }
    Ok(history)
}

/// Builds a vocabulary from `corpus`, initializes a model and trains it.
pub fn train(
    corpus: &[AnnotatedSentence],
    schema: &LabelSchema,
    config: &TrainConfig,
    weights: LossWeights,
) -> Result<(Model, Vec<EpochRecord>)> {
    config.validate()?;
    let vocab = Vocabulary::build(corpus);
    let mut model = Model::new(config.model.clone(), schema.clone(), vocab, config.seed)?;
    let history = train_model(&mut model, corpus, config, weights)?;
    Ok((model, history))
}

/// One `(α, β, γ, δ)` setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl GridPoint {
    fn key(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }
}

/// Candidate values for each swept hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            alpha: AGGREGATION_GRID.to_vec(),
            beta: AGGREGATION_GRID.to_vec(),
            gamma: LOSS_WEIGHT_GRID.to_vec(),
            delta: LOSS_WEIGHT_GRID.to_vec(),
        }
    }
}

impl HyperGrid {
    pub fn single(p: GridPoint) -> Self {
        HyperGrid {
            alpha: vec![p.alpha],
            beta: vec![p.beta],
            gamma: vec![p.gamma],
            delta: vec![p.delta],
        }
    }

    /// Every combination, in ascending lexicographic `(α, β, γ, δ)` order.
    pub fn points(&self) -> Vec<GridPoint> {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (a, b, c, d) = (sorted(&self.alpha), sorted(&self.beta), sorted(&self.gamma), sorted(&self.delta));
        let mut out = Vec::with_capacity(a.len() * b.len() * c.len() * d.len());
        for &alpha in &a {
            for &beta in &b {
                for &gamma in &c {
                    for &delta in &d {
                        out.push(GridPoint { alpha, beta, gamma, delta });
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.points().is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        for &v in self.alpha.iter().chain(&self.beta) {
            if !AGGREGATION_GRID.contains(&v) {
                return Err(Error::Config(format!("aggregation value {v} not in {AGGREGATION_GRID:?}")));
            }
        }
        for &v in self.gamma.iter().chain(&self.delta) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("loss weight {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Validation scores used to rank grid points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevScore {
    pub re_f1: f64,
    pub ner_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub point: GridPoint,
    pub score: DevScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridRow,
    /// Every evaluated point, in grid order.
    pub rows: Vec<GridRow>,
}

/// Picks the best row: highest RE F1, then highest NER F1, then the
/// lexicographically smallest point.
pub fn select_best(rows: &[GridRow]) -> Option<&GridRow> {
    rows.iter().min_by(|a, b| {
        b.score
            .re_f1
            .total_cmp(&a.score.re_f1)
            .then(b.score.ner_f1.total_cmp(&a.score.ner_f1))
            .then_with(|| {
                a.point
                    .key()
                    .iter()
                    .zip(b.point.key())
                    .map(|(x, y)| x.total_cmp(&y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    })
}

/// Sweeps `grid`, scoring each point with `scorer`.
pub fn grid_search_with(
    grid: &HyperGrid,
    scorer: impl Fn(&GridPoint) -> Result<DevScore> + Sync,
) -> Result<GridResult> {
    grid.validate()?;
    let points = grid.points();
    let rows = points
        .par_iter()
        .map(|p| Ok(GridRow { point: *p, score: scorer(p)? }))
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&rows).expect("grid is non-empty").clone();
    Ok(GridResult { best, rows })
}

/// Trains one model per grid point on `train_set` and ranks them by exact-match
/// micro F1 on `dev_set`.
pub fn grid_search(
    train_set: &[AnnotatedSentence],
    dev_set: &[AnnotatedSentence],
    schema: &LabelSchema,
    config: &TrainConfig,
    grid: &HyperGrid,
) -> Result<GridResult> {
    if dev_set.is_empty() {
        return Err(Error::contract("grid search needs a non-empty validation set"));
    }
    grid_search_with(grid, |p| {
        let (model, _) = train_point(train_set, schema, config, p)?;
        score_point(&model, dev_set, config.threshold)
    })
}

/// Trains a model at one grid point.
pub fn train_point(
    train_set: &[AnnotatedSentence],
    schema: &LabelSchema,
    config: &TrainConfig,
    p: &GridPoint,
) -> Result<(Model, Vec<EpochRecord>)> {
    let mut cfg = config.clone();
    cfg.model.alpha = p.alpha;
    cfg.model.beta = p.beta;
    train(
        train_set,
        schema,
        &cfg,
        LossWeights {
            gamma: p.gamma,
            delta: p.delta,
        },
    )
}

pub fn score_point(model: &Model, dev_set: &[AnnotatedSentence], threshold: f64) -> Result<DevScore> {
    let preds = model.predict_corpus(dev_set, threshold)?;
    let (ner, re) = score_corpus(dev_set, &preds, MatchMode::Exact)?;
    Ok(DevScore {
        re_f1: re.f1,
        ner_f1: ner.f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, AnnotationMode};
    use std::f64::consts::LN_2;

    fn schema() -> LabelSchema {
        LabelSchema::new(vec!["P".into(), "O".into()], vec!["r".into(), "q".into()], AnnotationMode::FullSpan).unwrap()
    }

    fn corpus() -> Vec<AnnotatedSentence> {
        parse_corpus(
            r#"{"tokens":["ann","met","bob"],"entities":[{"start":0,"end":0,"type":"P"},{"start":2,"end":2,"type":"P"}],"relations":[{"subject":0,"object":1,"type":"r"}]}
{"tokens":["big","co","hired","ann"],"entities":[{"start":0,"end":1,"type":"O"},{"start":3,"end":3,"type":"P"}],"relations":[{"subject":1,"object":0,"type":"q"}]}"#
                .as_bytes(),
            "mem",
            &schema(),
        )
        .unwrap()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            model: ModelConfig {
                embed_dim: 4,
                hidden_dim: 4,
                decoder_width: 4,
                ..ModelConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn bce_closed_forms() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::full(&[2, 2, 1], 0.5));
        let gold = Tensor::zeros(&[2, 2, 1]);
        let mask = Tensor::full(&[2, 2, 1], 1.0);
        let l = bce_loss(&mut g, p, &gold, &mask, 1e-7).unwrap();
        assert!((g.value(l).item().unwrap() - 4.0 * LN_2).abs() < 1e-12);

        let y = Tensor::new(vec![4], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let p = g.leaf(y.clone());
        let eps = 1e-7;
        let l = bce_loss(&mut g, p, &y, &Tensor::full(&[4], 1.0), eps).unwrap();
        let v = g.value(l).item().unwrap();
        assert!(v >= 0.0 && v <= 4.0 * -(1.0 - eps).ln() + 1e-15);
    }

    #[test]
    fn bce_matches_scalar_sum() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 30;
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let m: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let mut expected = 0.0;
        for i in 0..n {
            if m[i] == 1.0 {
                expected -= y[i] * p[i].ln() + (1.0 - y[i]) * (1.0 - p[i]).ln();
            }
        }
        let mut g = Graph::new();
        let pv = g.leaf(Tensor::vector(p));
        let l = bce_loss(&mut g, pv, &Tensor::vector(y), &Tensor::vector(m), 1e-7).unwrap();
        assert!((g.value(l).item().unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_model_joint_loss_counts_cells() {
        let c = corpus();
        let mut model = Model::new(small_config().model, schema(), Vocabulary::build(&c), 1).unwrap();
        model.params.zero_all();
        let (g, _, loss) = sentence_loss(&model, &c[1], LossWeights::default(), 1e-7).unwrap();
        // t = 4: 10 upper-triangle cells × 2 types + 16 cells × 2 types.
        let expected = (10.0 * 2.0 + 16.0 * 2.0) * LN_2;
        assert!((g.value(loss.total).item().unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn joint_loss_is_linear_in_weights() {
        let c = corpus();
        let model = Model::new(small_config().model, schema(), Vocabulary::build(&c), 3).unwrap();
        let (g, _, base) = sentence_loss(&model, &c[0], LossWeights::default(), 1e-7).unwrap();
        let (ner, re) = (g.value(base.ner).item().unwrap(), g.value(base.re).item().unwrap());
        for (gamma, delta) in [(0.75, 0.85), (1.0, 0.0), (0.85, 1.0)] {
            let (g, _, l) = sentence_loss(&model, &c[0], LossWeights { gamma, delta }, 1e-7).unwrap();
            let v = g.value(l.total).item().unwrap();
            assert!((v - (gamma * ner + delta * re)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_delta_leaves_relation_head_without_gradient() {
        let c = corpus();
        let model = Model::new(small_config().model, schema(), Vocabulary::build(&c), 3).unwrap();
        let (_, grads) = sentence_gradients(&model, &c[0], LossWeights { gamma: 1.0, delta: 0.0 }, 1e-7).unwrap();
        for ((name, _), g) in model.params.iter().zip(&grads) {
            if name.starts_with("re.") {
                assert_eq!(g.max_abs(), 0.0, "{name}");
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let c = corpus();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..small_config()
        };
        let vocab = Vocabulary::build(&c);
        let mut model = Model::new(cfg.model.clone(), schema(), vocab, cfg.seed).unwrap();
        let before = model.params.clone();
        let hist = train_model(&mut model, &c, &cfg, LossWeights::default()).unwrap();
        assert_eq!(model.params, before);
        assert!(hist.windows(2).all(|w| w[0].loss == w[1].loss));
    }

    #[test]
    fn training_is_deterministic() {
        let c = corpus();
        let cfg = TrainConfig {
            batch_size: 2,
            ..small_config()
        };
        let (m1, h1) = train(&c, &schema(), &cfg, LossWeights::default()).unwrap();
        let (m2, h2) = train(&c, &schema(), &cfg, LossWeights::default()).unwrap();
        let bits = |h: &[EpochRecord]| h.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&h1), bits(&h2));
        assert_eq!(m1.params, m2.params);
        assert_eq!(h1.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn divergence_is_reported() {
        let c = corpus();
        let cfg = small_config();
        let mut model = Model::new(cfg.model.clone(), schema(), Vocabulary::build(&c), 1).unwrap();
        model.params.get_mut("enc0.s.b_z").unwrap().data_mut()[0] = f64::NAN;
        let err = train_model(&mut model, &c, &cfg, LossWeights::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 1, step: 1, .. }), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(train(&[], &schema(), &small_config(), LossWeights::default()).is_err());
    }

    #[test]
    fn grid_has_81_points_in_order() {
        let pts = HyperGrid::default().points();
        assert_eq!(pts.len(), 81);
        assert_eq!(pts[0].key(), [-1.0, -1.0, 0.75, 0.75]);
        assert_eq!(pts[80].key(), [1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_point_grid_returns_it() {
        let p = GridPoint { alpha: 0.5, beta: -1.0, gamma: 0.85, delta: 1.0 };
        let r = grid_search_with(&HyperGrid::single(p), |_| Ok(DevScore { re_f1: 0.0, ner_f1: 0.0 })).unwrap();
        assert_eq!(r.best.point, p);
        assert_eq!(r.rows.len(), 1);
    }

    #[test]
    fn rigged_scorer_wins() {
        let target = GridPoint { alpha: 1.0, beta: 1.0, gamma: 1.0, delta: 1.0 };
        let r = grid_search_with(&HyperGrid::default(), |p| {
            Ok(DevScore {
                re_f1: if *p == target { 0.9 } else { 0.5 },
                ner_f1: 0.7,
            })
        })
        .unwrap();
        assert_eq!(r.best.point, target);
        assert_eq!(r.rows.len(), 81);
    }

    #[test]
    fn ties_break_on_ner_then_order() {
        let r = grid_search_with(&HyperGrid::default(), |p| {
            Ok(DevScore {
                re_f1: 0.5,
                ner_f1: if p.gamma == 0.85 { 0.6 } else { 0.4 },
            })
        })
        .unwrap();
        assert_eq!(r.best.point.key(), [-1.0, -1.0, 0.85, 0.75]);
    }

    #[test]
    fn real_sweep_returns_member_of_grid() {
        let c = corpus();
        let grid = HyperGrid {
            alpha: vec![1.0, -1.0],
            beta: vec![0.5],
            gamma: vec![1.0],
            delta: vec![0.75, 1.0],
        };
        let r = grid_search(&c, &c, &schema(), &small_config(), &grid).unwrap();
        assert!(grid.points().contains(&r.best.point));
        assert_eq!(r.rows.len(), 4);
        assert!(grid_search(&c, &[], &schema(), &small_config(), &grid).is_err());
    }
}
