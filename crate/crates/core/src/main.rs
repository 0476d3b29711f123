use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use darter::cli::{cmd_eval, cmd_gridsearch, cmd_predict, cmd_train, emit_lines, Overrides, RunConfig};
use darter::{MatchMode, ModelVariant};

#[derive(Parser)]
#[command(name = "darter", version, about = "Joint entity and relation extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write a checkpoint plus loss history.
    Train(Common),
    /// Score a checkpoint on the test corpus.
    Eval(Common),
    /// Write predictions for unlabeled sentences as JSON lines.
    Predict(Common),
    /// Sweep aggregation and loss weights on the validation corpus.
    Gridsearch(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<ModelVariant>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    no_interaction: bool,
    #[arg(long)]
    no_entity_features_in_re: bool,
    #[arg(long = "match", value_parser = parse_match)]
    match_mode: Option<MatchMode>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<ModelVariant, String> {
    s.parse().map_err(|e: darter::Error| e.to_string())
}

fn parse_match(s: &str) -> Result<MatchMode, String> {
    s.parse().map_err(|e: darter::Error| e.to_string())
}

impl Common {
    fn run_config(&self) -> darter::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            epochs: self.epochs,
            variant: self.variant,
            layers: self.layers,
            no_interaction: self.no_interaction,
            no_entity_features_in_re: self.no_entity_features_in_re,
            match_mode: self.match_mode,
            train: self.train.clone(),
            dev: self.dev.clone(),
            test: self.test.clone(),
            input: self.input.clone(),
            schema: self.schema.clone(),
            checkpoint: self.checkpoint.clone(),
            out: self.out.clone(),
        });
        Ok(cfg)
    }
}

fn run(cli: Cli) -> darter::Result<()> {
    match cli.command {
        Command::Train(c) => {
            let out = cmd_train(&c.run_config()?)?;
            let last = out.history.last().map_or(f64::NAN, |r| r.loss);
            println!(
                "trained {} epochs, final loss {last:.6}; checkpoint {}, history {}",
                out.history.len(),
                out.checkpoint.display(),
                out.history_file.display()
            );
        }
        Command::Eval(c) => print!("{}", cmd_eval(&c.run_config()?)?.render_text()),
        Command::Predict(c) => {
            let cfg = c.run_config()?;
            let lines = cmd_predict(&cfg)?;
            if cfg.paths.out.is_none() {
                emit_lines(std::io::stdout().lock(), &lines).map_err(|e| darter::Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })?;
            }
        }
        Command::Gridsearch(c) => {
            let r = cmd_gridsearch(&c.run_config()?)?;
            let p = r.best.point;
            println!(
                "best of {} points: alpha={} beta={} gamma={} delta={} (dev RE F1 {:.4}, NER F1 {:.4})",
                r.rows.len(),
                p.alpha,
                p.beta,
                p.gamma,
                p.delta,
                r.best.score.re_f1,
                r.best.score.ner_f1
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
