use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use rayon::prelude::*;

use zsie_core::eval::{load_conll, load_corpus, save_corpus, score_task, tune_threshold, Corpus, CorpusDocument, ScoreReport, DEFAULT_STEP};
use zsie_core::pipeline::{GoldEntity, GoldTrigger};
use zsie_core::text::tokenize_sentences;
use zsie_core::{run_e2e_on, run_task_on, GoldSpans, PipelineError, Task};

use crate::{backend, Common, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold corpus: corpus JSON or CoNLL-2003 columns.
    #[arg(long)]
    gold: PathBuf,
    /// Prediction corpus JSON. Without it the pipeline runs on the gold
    /// sentences using --schema and --backend.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Directory receiving `<task>.json`, `<task>.txt` and, for live runs,
    /// `predictions.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Standard output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Scored development predictions (corpus JSON).
    #[arg(long)]
    dev: PathBuf,
    /// Gold corpus for the development set.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    step: f64,
    /// File receiving the report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Loads corpus JSON, or CoNLL columns when the content is not a JSON object.
pub fn load_any_corpus(path: &Path) -> anyhow::Result<Corpus> {
    let bytes = crate::read(path)?;
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let trimmed = text.trim_start();
    let corpus = if trimmed.is_empty() || trimmed.starts_with('{') {
        load_corpus(text.as_bytes())
    } else {
        load_conll(&text)
    };
    corpus.with_context(|| format!("loading {}", path.display()))
}

fn gold_spans(doc: &CorpusDocument) -> GoldSpans {
    GoldSpans {
        entities: doc
            .entities
            .iter()
            .map(|e| GoldEntity {
                id: None,
                sentence_index: e.sentence,
                char_start: e.start,
                char_end: e.end,
                entity_type: e.label.clone(),
            })
            .collect(),
        triggers: doc
            .events
            .iter()
            .map(|e| GoldTrigger {
                id: None,
                sentence_index: e.sentence,
                char_start: None,
                char_end: None,
                event_type: e.label.clone(),
            })
            .collect(),
    }
}

/// Runs the pipeline over every gold document. Returns the predictions and
/// the number of documents whose run failed part way.
fn live_predictions(common: &Common, gold: &Corpus) -> anyhow::Result<(Corpus, usize)> {
    let schema = common.schema()?;
    let config = common.run_config()?;
    let task = common.run_task()?;
    let backends = backend::build(common.backend.as_deref(), common.tagger.as_deref(), &config)?;
    let results: Vec<Result<CorpusDocument, PipelineError>> = gold
        .documents
        .par_iter()
        .map(|g| {
            let sentences = tokenize_sentences(&g.sentences);
            let doc = match task {
                None => run_e2e_on(sentences, &schema, &config, &backends),
                Some(task) => run_task_on(task, sentences, Some(&gold_spans(g)), &schema, &config, &backends),
            };
            doc.map(|d| CorpusDocument::from_annotations(g.id.clone(), &d))
        })
        .collect();
    let mut documents = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (g, r) in gold.documents.iter().zip(results) {
        match r {
            Ok(d) => documents.push(d),
            Err(PipelineError::Stage { stage, source, partial }) => {
                eprintln!("{}: {stage} stage failed: {source}", g.id);
                failed += 1;
                documents.push(CorpusDocument::from_annotations(g.id.clone(), &partial));
            }
            Err(e) => bail!("{}: {e}", g.id),
        }
    }
    Ok((Corpus { labels: None, documents }, failed))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn eval(common: &Common, args: EvalArgs) -> anyhow::Result<ExitCode> {
    let gold = load_any_corpus(&args.gold)?;
    gold.validate().with_context(|| format!("validating {}", args.gold.display()))?;
    let (pred, failed, threshold) = match &args.pred {
        Some(path) => {
            let pred = load_any_corpus(path)?;
            // Explicit predictions are scored as given unless a threshold is requested.
            (pred, 0, common.threshold)
        }
        None => {
            let (pred, failed) = live_predictions(common, &gold)?;
            let threshold = common.run_config()?.inference.threshold;
            (pred, failed, Some(threshold))
        }
    };
    let tasks: Vec<Task> = match common.task {
        Some(t) => vec![t],
        None => Task::ALL
            .into_iter()
            .filter(|t| gold.documents.iter().any(|d| !d.is_empty_for(*t)))
            .collect(),
    };
    if tasks.is_empty() {
        bail!("{} has no annotations to score", args.gold.display());
    }
    if common.mode == Mode::Task && args.pred.is_some() {
        log::warn!("--mode task has no effect when --pred is given");
    }
    let reports: Vec<ScoreReport> = tasks
        .iter()
        .map(|t| score_task(&pred, &gold, *t, threshold))
        .collect::<Result<_, _>>()?;

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for r in &reports {
            let name = r.task.as_str().to_ascii_lowercase();
            write_file(&dir.join(format!("{name}.json")), format!("{}\n", r.to_json()).as_bytes())?;
            write_file(&dir.join(format!("{name}.txt")), r.to_table().as_bytes())?;
        }
        if args.pred.is_none() {
            write_file(&dir.join("predictions.json"), &save_corpus(&pred))?;
        }
    }
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&reports)?),
        Format::Table => {
            for r in &reports {
                print!("{}", r.to_table());
            }
        }
    }
    Ok(if failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

/// Fewest decimal places, at least 2, that print `t` exactly.
fn decimals(t: f64) -> usize {
    (2..12)
        .find(|&d| {
            let scale = 10f64.powi(d as i32);
            ((t * scale).round() / scale - t).abs() < 1e-9
        })
        .unwrap_or(12)
}

pub fn tune(common: &Common, args: TuneArgs) -> anyhow::Result<ExitCode> {
    let task = common.task.context("--task is required")?;
    let dev = load_any_corpus(&args.dev)?;
    let gold = load_any_corpus(&args.gold)?;
    gold.validate().with_context(|| format!("validating {}", args.gold.display()))?;
    let result = tune_threshold(&dev, &gold, task, args.step)?;
    let json = result.report.to_json();
    if let Some(path) = &args.out {
        write_file(path, format!("{json}\n").as_bytes())?;
    }
    println!("{:.*}", decimals(result.threshold), result.threshold);
    println!("{json}");
    eprint!("{}", result.report.to_table());
    Ok(ExitCode::SUCCESS)
}
