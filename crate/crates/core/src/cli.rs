//! Command implementations behind the `darter` binary.
//!
//! A run is described by a TOML file (see `data/synthetic/run.toml`) plus
//! flag overrides. Relative paths in the file are resolved against the
//! file's directory; paths given as flags are used as-is.

use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::corpus::{load_corpus, sentence_to_json, AnnotatedSentence, LabelSchema};
use crate::error::{Error, Result};
use crate::eval::{report, EvalReport, MatchMode};
use crate::model::{Model, ModelConfig, ModelVariant};
use crate::training::{
    grid_search_with, score_point, train_point, EpochRecord, GridPoint, GridResult, HyperGrid, LossWeights,
    TrainConfig,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Unlabeled sentences for `predict`; falls back to `test`.
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Loss history written by `train`; defaults to the checkpoint path with
    /// a `.history.jsonl` extension.
    pub history: Option<PathBuf>,
    /// Report, predictions or sweep results, depending on the command.
    pub out: Option<PathBuf>,
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        for p in [
            &mut self.train,
            &mut self.dev,
            &mut self.test,
            &mut self.input,
            &mut self.schema,
            &mut self.checkpoint,
            &mut self.history,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Optimizer settings; the architecture lives in `[model]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub clamp_eps: f64,
    pub threshold: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            seed: d.seed,
            batch_size: d.batch_size,
            clamp_eps: d.clamp_eps,
            threshold: d.threshold,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    #[serde(rename = "match")]
    pub match_mode: MatchMode,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub loss: LossWeights,
    pub eval: EvalSection,
    /// Sweep for `gridsearch`; the full 81-point grid when absent.
    pub grid: Option<HyperGrid>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.paths.resolve_against(base);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::Config(format!("config file `{}` does not exist", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            seed: t.seed,
            batch_size: t.batch_size,
            clamp_eps: t.clamp_eps,
            threshold: t.threshold,
            model: self.model.clone(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(epochs) = o.epochs {
            self.train.epochs = epochs;
        }
        if let Some(v) = o.variant {
            self.model.variant = v;
            if v == ModelVariant::BiDarter && o.layers.is_none() {
                self.model.n_layers = 2;
            }
        }
        if let Some(n) = o.layers {
            self.model.n_layers = n;
        }
        if o.no_interaction {
            self.model.interaction = false;
        }
        if o.no_entity_features_in_re {
            self.model.entity_features_in_re = false;
        }
        if let Some(m) = o.match_mode {
            self.eval.match_mode = m;
        }
        let p = &mut self.paths;
        for (slot, value) in [
            (&mut p.train, &o.train),
            (&mut p.dev, &o.dev),
            (&mut p.test, &o.test),
            (&mut p.input, &o.input),
            (&mut p.schema, &o.schema),
            (&mut p.checkpoint, &o.checkpoint),
            (&mut p.out, &o.out),
        ] {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        self.loss.validate()
    }
}

/// Command-line settings that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub variant: Option<ModelVariant>,
    pub layers: Option<usize>,
    pub no_interaction: bool,
    pub no_entity_features_in_re: bool,
    pub match_mode: Option<MatchMode>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

fn existing<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    match p {
        None => Err(Error::Config(format!("no {what} path configured"))),
        Some(p) if !p.exists() => Err(Error::Config(format!("{what} `{}` does not exist", p.display()))),
        Some(p) => Ok(p),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("no {what} path configured")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T, what: &str) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        context: format!("serializing {what}"),
        source,
    })
}

pub fn history_path(cfg: &RunConfig) -> Result<PathBuf> {
    match &cfg.paths.history {
        Some(p) => Ok(p.clone()),
        None => Ok(required(&cfg.paths.checkpoint, "checkpoint")?.with_extension("history.jsonl")),
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    pub checkpoint: PathBuf,
    pub history_file: PathBuf,
}

/// Trains on `paths.train`, then writes the checkpoint and the per-epoch
/// loss history (one JSON object per line).
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let train_path = existing(&cfg.paths.train, "training corpus")?;
    let schema_path = existing(&cfg.paths.schema, "schema")?;
    let ck_path = required(&cfg.paths.checkpoint, "checkpoint")?.to_path_buf();
    let history_file = history_path(cfg)?;
    cfg.validate()?;
    let schema = LabelSchema::load(schema_path)?;
    let corpus = load_corpus(train_path, &schema)?;
    let tc = cfg.train_config();
    let mut model = Model::new(tc.model.clone(), schema, crate::corpus::Vocabulary::build(&corpus), tc.seed)?;
    let history = crate::training::train_model_with(&mut model, &corpus, &tc, cfg.loss, |r, _| {
        if r.epoch % 50 == 0 || r.epoch == tc.epochs {
            log::info!("epoch {}: loss {:.6}", r.epoch, r.loss);
        }
        ControlFlow::Continue(())
    })?;
    let mut lines = String::new();
    for r in &history {
        lines.push_str(&serde_json::to_string(r).expect("plain record serializes"));
        lines.push('\n');
    }
    write_file(&history_file, &lines)?;
    if let Some(dir) = ck_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    checkpoint::save(&ck_path, &model, Some(&tc), Some(cfg.loss))?;
    Ok(TrainOutcome {
        model,
        history,
        checkpoint: ck_path,
        history_file,
    })
}

/// Loads the checkpoint and, when a schema file is configured, checks that
/// it agrees with the one stored in the checkpoint.
fn load_model(cfg: &RunConfig) -> Result<Model> {
    let model = checkpoint::load(existing(&cfg.paths.checkpoint, "checkpoint")?)?;
    if let Some(p) = &cfg.paths.schema {
        let schema = LabelSchema::load(existing(&Some(p.clone()), "schema")?)?;
        if schema != model.schema {
            return Err(Error::Config(format!(
                "schema `{}` does not match the schema stored in the checkpoint",
                p.display()
            )));
        }
    }
    Ok(model)
}

/// Decodes `paths.test` and scores it; the JSON report goes to `paths.out`
/// when set.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    let test_path = existing(&cfg.paths.test, "test corpus")?;
    cfg.validate()?;
    let model = load_model(cfg)?;
    let corpus = load_corpus(test_path, &model.schema)?;
    let preds = model.predict_corpus(&corpus, cfg.train.threshold)?;
    let rep = report(&corpus, &preds, &model.schema, cfg.eval.match_mode)?;
    if let Some(out) = &cfg.paths.out {
        write_file(out, &to_json(&rep, "report")?)?;
    }
    Ok(rep)
}

/// Predicts entities and relations for `paths.input` (or `paths.test`).
/// Returns one corpus-format JSON line per input sentence and writes them
/// to `paths.out` when set. Gold annotations in the input are ignored.
pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<String>> {
    let input = if cfg.paths.input.is_some() {
        existing(&cfg.paths.input, "input corpus")?
    } else {
        existing(&cfg.paths.test, "input corpus")?
    };
    cfg.validate()?;
    let model = load_model(cfg)?;
    let corpus = load_corpus(input, &model.schema)?;
    let preds = model.predict_corpus(&corpus, cfg.train.threshold)?;
    let lines: Vec<String> = corpus
        .iter()
        .zip(&preds)
        .map(|(s, p)| {
            let out = AnnotatedSentence::from_predictions(s.tokens.clone(), p, model.annotation());
            sentence_to_json(&out, &model.schema)
        })
        .collect();
    if let Some(out) = &cfg.paths.out {
        let mut text = String::new();
        for l in &lines {
            text.push_str(l);
            text.push('\n');
        }
        write_file(out, &text)?;
    }
    Ok(lines)
}

/// Sweeps the configured grid, training on `paths.train` and ranking on
/// `paths.dev`. Results go to `paths.out`; the best model is saved to
/// `paths.checkpoint` when set.
pub fn cmd_gridsearch(cfg: &RunConfig) -> Result<GridResult> {
    let train_path = existing(&cfg.paths.train, "training corpus")?;
    let dev_path = existing(&cfg.paths.dev, "validation corpus")?;
    let schema_path = existing(&cfg.paths.schema, "schema")?;
    cfg.validate()?;
    let grid = cfg.grid.clone().unwrap_or_default();
    let schema = LabelSchema::load(schema_path)?;
    let train_set = load_corpus(train_path, &schema)?;
    let dev_set = load_corpus(dev_path, &schema)?;
    if dev_set.is_empty() {
        return Err(Error::Config(format!("validation corpus `{}` is empty", dev_path.display())));
    }
    let tc = cfg.train_config();
    let models: Mutex<Vec<(GridPoint, Model)>> = Mutex::new(Vec::new());
    let result = grid_search_with(&grid, |p| {
        let (model, _) = train_point(&train_set, &schema, &tc, p)?;
        let score = score_point(&model, &dev_set, tc.threshold)?;
        if cfg.paths.checkpoint.is_some() {
            models.lock().expect("no panics while holding the lock").push((*p, model));
        }
        Ok(score)
    })?;
    if let Some(out) = &cfg.paths.out {
        write_file(out, &to_json(&result, "grid results")?)?;
    }
    if let Some(ck) = &cfg.paths.checkpoint {
        let models = models.into_inner().expect("no panics while holding the lock");
        let (_, best) = models
            .iter()
            .find(|(p, _)| *p == result.best.point)
            .expect("every grid point produced a model");
        let weights = LossWeights {
            gamma: result.best.point.gamma,
            delta: result.best.point.delta,
        };
        let mut best_tc = tc.clone();
        best_tc.model = best.config.clone();
        if let Some(dir) = ck.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        checkpoint::save(ck, best, Some(&best_tc), Some(weights))?;
    }
    Ok(result)
}

/// Writes lines to a stream, one per line.
pub fn emit_lines(mut w: impl Write, lines: &[String]) -> std::io::Result<()> {
    for l in lines {
        writeln!(w, "{l}")?;
    }
    Ok(())
}
