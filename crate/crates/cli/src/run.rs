use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Args;
use rayon::prelude::*;

use zsie_core::{run_e2e, run_task, DocumentAnnotations, PipelineError};

use crate::{backend, Common};

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Text files, one document each.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output file for a single input, or a directory receiving
    /// `<stem>.json` per input. Standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output_paths(inputs: &[PathBuf], out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if inputs.len() == 1 && !out.is_dir() {
        return Ok(vec![out.to_path_buf()]);
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for input in inputs {
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "doc".into());
        let path = out.join(format!("{stem}.json"));
        if paths.contains(&path) {
            bail!("inputs map to the same output file {}", path.display());
        }
        paths.push(path);
    }
    Ok(paths)
}

pub fn run(common: &Common, args: RunArgs) -> anyhow::Result<ExitCode> {
    let schema = common.schema()?;
    let config = common.run_config()?;
    let task = common.run_task()?;
    let backends = backend::build(common.backend.as_deref(), common.tagger.as_deref(), &config)?;
    let texts: Vec<String> = args
        .inputs
        .iter()
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<_>>()?;
    let outputs = args.out.as_deref().map(|o| output_paths(&args.inputs, o)).transpose()?;

    let results: Vec<Result<DocumentAnnotations, PipelineError>> = texts
        .par_iter()
        .map(|text| match task {
            None => run_e2e(text, &schema, &config, &backends),
            Some(task) => run_task(task, text, None, &schema, &config, &backends),
        })
        .collect();

    let mut docs = Vec::with_capacity(results.len());
    let mut failed = 0;
    for (input, result) in args.inputs.iter().zip(results) {
        match result {
            Ok(doc) => docs.push(doc),
            Err(PipelineError::Stage { stage, source, partial }) => {
                eprintln!("{}: {stage} stage failed: {source}", input.display());
                failed += 1;
                docs.push(*partial);
            }
            Err(e) => bail!("{}: {e}", input.display()),
        }
    }
    for doc in &docs {
        for w in &doc.warnings {
            log::warn!("{w}");
        }
    }

    match outputs {
        Some(paths) => {
            for (path, doc) in paths.iter().zip(&docs) {
                let mut bytes = serde_json::to_vec_pretty(doc)?;
                bytes.push(b'\n');
                std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            if let [doc] = docs.as_slice() {
                serde_json::to_writer_pretty(&mut stdout, doc)?;
                writeln!(stdout)?;
            } else {
                for doc in &docs {
                    serde_json::to_writer(&mut stdout, doc)?;
                    writeln!(stdout)?;
                }
            }
        }
    }
    Ok(if failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
