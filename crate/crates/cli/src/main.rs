use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ovrstack::augment::{augment_rows, AugmentConfig};
use ovrstack::config::RunConfig;
use ovrstack::corpus::CorpusFormat;
use ovrstack::eval::{generalize, run_experiment, summary_csv, train_pipeline, Pipeline, Rule};
use ovrstack::persist::{read_to_string, write_atomic, write_json};
use ovrstack::stage1::{read_features, write_features, FeatureRow, LabeledFeatures};
use ovrstack::stage2::{train_combiner, CombinerKind};
use ovrstack::vectorizer::NGramVocabulary;
use ovrstack::{ErrorKind, Label};

#[derive(Parser)]
#[command(name = "ovrstack", version, about = "Two-stage one-vs-rest hate speech classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Corpus format: tsv, csv or json-lines.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<CorpusFormat>,
}

#[derive(Args)]
struct PipelineFlags {
    /// Bank size, 3 or 5.
    #[arg(long)]
    classifiers: Option<usize>,

    /// fixed, stacked, lr, rf, ada, gb or xgb.
    #[arg(long, value_parser = parse_kind)]
    stage2: Option<CombinerKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Build an n-gram vocabulary from a corpus.
    Vocab {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Vocabulary cap; defaults to the configured cap for the order.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a bank and combiner on a whole corpus.
    Train {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify texts, one per line, with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Write classes here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated k-fold cross-validation of the full pipeline.
    Evaluate {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineFlags,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained bank on a hate / non-hate corpus.
    Generalize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// single, three or five.
        #[arg(long, value_parser = parse_rule)]
        rule: Option<Rule>,
        /// Clean texts before classifying.
        #[arg(long)]
        filtered: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write first-stage feature rows for a corpus.
    Features {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic feature rows from labeled ones.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mdv: Option<f64>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a combiner on labeled feature rows.
    Stage2 {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        stage2: Option<CombinerKind>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    s.parse().map_err(|e: ovrstack::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<CombinerKind, String> {
    s.parse().map_err(|e: ovrstack::Error| e.to_string())
}

fn parse_rule(s: &str) -> Result<Rule, String> {
    s.parse().map_err(|e: ovrstack::Error| e.to_string())
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    details: T,
}

fn write_manifest<T: Serialize>(path: &Path, command: &str, config: &RunConfig, details: T) -> Result<()> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: config.experiment.seed,
        config,
        details,
    };
    Ok(write_json(path, &manifest)?)
}

/// `<file>.manifest.json` next to a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn out_dir(config: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| config.output.clone());
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

impl PipelineFlags {
    fn apply(&self, config: &mut RunConfig) {
        let pipeline = &mut config.experiment.pipeline;
        if let Some(c) = self.classifiers {
            pipeline.stage1.classifiers = c;
        }
        if let Some(k) = self.stage2 {
            pipeline.stage2.kind = k;
        }
    }
}

fn labeled_rows(rows: &[FeatureRow]) -> Result<Vec<LabeledFeatures>> {
    rows.iter()
        .map(|r| r.labeled().with_context(|| format!("row '{}' has no label", r.id)))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
    }
    if cli.format.is_some() {
        config.format = cli.format;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(ovrstack::Error::Config("jobs: must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }

    match cli.command {
        Command::Vocab { input, order, cap, out } => {
            if input.is_some() {
                config.data = input;
            }
            config.validate()?;
            if !(1..=3).contains(&order) {
                return Err(ovrstack::Error::Config(format!("order: must be 1, 2 or 3, got {order}")).into());
            }
            let cap = cap.unwrap_or(config.experiment.pipeline.stage1.caps[order - 1]);
            let corpus = config.require("data")?;
            let vocab = NGramVocabulary::build(&corpus, order, cap)?;
            vocab.save(&out)?;
            write_manifest(&sidecar(&out), "vocab", &config, serde_json::json!({ "order": order, "cap": cap, "size": vocab.len() }))?;
            eprintln!("{} entries written to {}", vocab.len(), out.display());
        }
        Command::Train { input, pipeline, out } => {
            if input.is_some() {
                config.data = input;
            }
            pipeline.apply(&mut config);
            config.validate()?;
            let corpus = config.require("data")?;
            let (model, summary) = train_pipeline(&corpus, &config.experiment.pipeline, config.experiment.seed)?;
            let dir = out_dir(&config, out)?;
            model.save(&dir)?;
            write_manifest(&dir.join("manifest.json"), "train", &config, &summary)?;
            eprintln!("model written to {}", dir.display());
        }
        Command::Predict { model, input, out } => {
            let model = Pipeline::load(&model)?;
            let text = read_to_string(&input)?;
            let mut lines = String::new();
            for line in text.lines() {
                lines.push_str(model.predict_text(line)?.as_str());
                lines.push('\n');
            }
            match out {
                Some(path) => {
                    write_atomic(&path, lines.as_bytes())?;
                    write_manifest(&sidecar(&path), "predict", &config, serde_json::json!({ "inputs": text.lines().count() }))?;
                }
                None => print!("{lines}"),
            }
        }
        Command::Evaluate {
            input,
            pipeline,
            folds,
            repetitions,
            out,
        } => {
            if input.is_some() {
                config.data = input;
            }
            pipeline.apply(&mut config);
            if let Some(k) = folds {
                config.experiment.folds = k;
            }
            if let Some(r) = repetitions {
                config.experiment.repetitions = r;
            }
            config.validate()?;
            let corpus = config.require("data")?;
            let report = run_experiment(&corpus, &config.experiment)?;
            let dir = out_dir(&config, out)?;
            write_json(&dir.join("report.json"), &report)?;
            write_atomic(&dir.join("summary.csv"), summary_csv(&report.summary)?.as_bytes())?;
            write_manifest(&dir.join("manifest.json"), "evaluate", &config, serde_json::json!({ "folds": report.folds.len() }))?;
            eprintln!(
                "total F {:.4} (std {:.4}) over {} folds",
                report.summary.total_f.mean,
                report.summary.total_f.std,
                report.folds.len()
            );
        }
        Command::Generalize {
            model,
            input,
            rule,
            filtered,
            out,
        } => {
            if input.is_some() {
                config.test_data = input;
            }
            if let Some(r) = rule {
                config.rule = r;
            }
            config.filtered |= filtered;
            config.validate()?;
            let corpus = config.require("test_data")?;
            let model = Pipeline::load(&model)?;
            let report = generalize(&model.bank, &corpus, config.rule, config.filtered)?;
            let dir = out_dir(&config, out)?;
            write_json(&dir.join("report.json"), &report)?;
            write_manifest(&dir.join("manifest.json"), "generalize", &config, serde_json::json!({ "samples": corpus.len() }))?;
            for c in &report.metrics.classes {
                eprintln!("{} F {:.4}", c.label, c.f_score);
            }
            eprintln!("total F {:.4}", report.metrics.total_f);
        }
        Command::Features { model, input, out } => {
            if input.is_some() {
                config.data = input;
            }
            config.validate()?;
            let corpus = config.require("data")?;
            let model = Pipeline::load(&model)?;
            let features = model.bank.predict_corpus(&corpus)?;
            let rows: Vec<FeatureRow> = corpus
                .iter()
                .zip(features)
                .map(|(s, features)| FeatureRow {
                    id: s.id.clone(),
                    features,
                    label: s.label.and_then(Label::as_class),
                })
                .collect();
            write_features(&out, &rows)?;
            write_manifest(&sidecar(&out), "features", &config, serde_json::json!({ "rows": rows.len() }))?;
        }
        Command::Augment {
            input,
            mdv,
            per_class,
            out,
        } => {
            let defaults = config.experiment.pipeline.augmentation.clone().unwrap_or_default();
            let augment = AugmentConfig {
                mdv: mdv.unwrap_or(defaults.mdv),
                per_class: per_class.unwrap_or(defaults.per_class),
                seed: config.experiment.seed,
            };
            config.experiment.pipeline.augmentation = Some(augment.clone());
            config.validate()?;
            let rows = labeled_rows(&read_features(&input)?)?;
            let generated = augment_rows(&rows, &augment)?;
            let out_rows: Vec<FeatureRow> = generated
                .into_iter()
                .enumerate()
                .map(|(i, r)| FeatureRow {
                    id: format!("gen-{i}"),
                    features: r.features,
                    label: Some(r.label),
                })
                .collect();
            write_features(&out, &out_rows)?;
            write_manifest(&sidecar(&out), "augment", &config, serde_json::json!({ "sources": rows.len(), "rows": out_rows.len() }))?;
        }
        Command::Stage2 { input, stage2, out } => {
            if let Some(k) = stage2 {
                config.experiment.pipeline.stage2.kind = k;
            }
            config.validate()?;
            let rows = labeled_rows(&read_features(&input)?)?;
            let width = rows.first().map(|r| r.features.width()).context("no feature rows")?;
            let combiner = train_combiner(&rows, width, &config.experiment.pipeline.stage2, config.experiment.seed)?;
            combiner.save(&out)?;
            write_manifest(&sidecar(&out), "stage2", &config, serde_json::json!({ "rows": rows.len(), "width": width }))?;
        }
    }
    Ok(())
}

/// 1 usage, 2 data, 3 numeric.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ovrstack::Error>().map(ovrstack::Error::kind) {
        Some(ErrorKind::Usage) => 1,
        Some(ErrorKind::Numeric) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
