//! `designcoder`: grouping, code generation, refinement, evaluation and transcript
//! recording from the command line.

mod commands;
mod config;
mod failure;
mod workspace;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use designcoder::codegen::GeneratedPage;
use designcoder::llm::TranscriptStore;
use designcoder::metrics::EvalInput;

use commands::RunInputs;
use config::{BackendMode, ConfigFile, Overrides, RunConfig, StyleModeArg};
use failure::{ExitClass, Failure};
use workspace::Workspace;

#[derive(Parser)]
#[command(name = "designcoder", version, about = "Turn design mockups into UI component code")]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalFlags {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendMode>,
    /// Transcript store (JSONL) to replay from or record into.
    #[arg(long, global = true)]
    transcript: Option<PathBuf>,
    #[arg(long, global = true)]
    base_url: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    max_concurrency: Option<usize>,
    #[arg(long, global = true)]
    refine_rounds: Option<usize>,
    #[arg(long, global = true, value_enum)]
    style_mode: Option<StyleModeArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Design document (JSON); its screenshot path is relative to it.
    doc: PathBuf,
    /// Render snapshot (JSON + PNG); one per refinement round.
    #[arg(long)]
    snapshot: Vec<PathBuf>,
    /// Ground-truth tree to evaluate against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Ground-truth screenshot; defaults to the design screenshot.
    #[arg(long)]
    truth_image: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the grouping chain and write the component tree.
    Group { doc: PathBuf },
    /// Style a component tree and generate the page code.
    Generate { doc: PathBuf, tree: PathBuf },
    /// Compare a generated page with render snapshots and repair it.
    Refine {
        page_dir: PathBuf,
        tree: PathBuf,
        doc: PathBuf,
        #[arg(long, required = true)]
        snapshot: Vec<PathBuf>,
    },
    /// Score a predicted tree (and screenshot) against ground truth.
    Evaluate {
        pred_tree: PathBuf,
        truth_tree: PathBuf,
        #[arg(long)]
        pred_image: Option<PathBuf>,
        #[arg(long)]
        truth_image: Option<PathBuf>,
        /// Report path; defaults to report.json in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// The whole pipeline: group, generate, then refine and evaluate when inputs allow.
    Run(PipelineArgs),
    /// Run the pipeline against the live backend, appending every exchange to the transcript.
    Record(PipelineArgs),
}

fn resolve_config(g: GlobalFlags) -> Result<RunConfig, Failure> {
    let file = match &g.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    RunConfig::resolve(
        file,
        Overrides {
            backend: g.backend,
            base_url: g.base_url,
            model: g.model,
            transcript: g.transcript,
            max_concurrency: g.max_concurrency,
            refine_rounds: g.refine_rounds,
            style_mode: g.style_mode,
            out: g.out,
        },
    )
}

fn pipeline_inputs(a: &PipelineArgs) -> RunInputs<'_> {
    RunInputs {
        doc: &a.doc,
        snapshots: &a.snapshot,
        truth: a.truth.as_deref(),
        truth_image: a.truth_image.as_deref(),
    }
}

fn record(args: &PipelineArgs, mut cfg: RunConfig, ws: &mut Workspace) -> Result<(), Failure> {
    cfg.backend.mode = BackendMode::Live;
    let path = cfg
        .backend
        .transcript_path
        .clone()
        .ok_or_else(|| Failure::new(ExitClass::Parse, "config", "record requires a transcript path"))?;
    let store = if path.exists() {
        TranscriptStore::load(&path).map_err(|e| failure::llm("record", e))?
    } else {
        TranscriptStore::new()
    };
    let store = Arc::new(store);
    let client = commands::make_client(&cfg, Some(store.clone()))?;
    let result = commands::run(&pipeline_inputs(args), &client, &cfg, ws);
    // keep whatever was recorded, even when a later stage failed
    store.save(&path).map_err(|e| failure::llm("record", e))?;
    ws.log(&format!("record: {} exchange(s) in {}", store.len(), path.display()));
    result.map(|_| ())
}

fn execute(command: Command, cfg: RunConfig) -> Result<(), Failure> {
    let mut ws = Workspace::open(&cfg.output_dir)?;
    let result = dispatch(command, cfg, &mut ws);
    if let Err(f) = &result {
        ws.log(&format!("failed ({}): {f}", f.code()));
    }
    result
}

fn dispatch(command: Command, cfg: RunConfig, ws: &mut Workspace) -> Result<(), Failure> {
    match command {
        Command::Group { doc } => {
            let mockup = commands::load_mockup("group", &doc)?;
            let client = commands::make_client(&cfg, None)?;
            commands::group(&mockup, &client, ws)?;
        }
        Command::Generate { doc, tree } => {
            let mockup = commands::load_mockup("generate", &doc)?;
            let tree = commands::load_tree("generate", &tree, &mockup)?;
            let client = commands::make_client(&cfg, None)?;
            commands::generate(&tree, &mockup, &client, &cfg, ws)?;
        }
        Command::Refine { page_dir, tree, doc, snapshot } => {
            let mockup = commands::load_mockup("refine", &doc)?;
            let tree = commands::load_tree("refine", &tree, &mockup)?;
            let page = GeneratedPage::read_from(&tree, &page_dir)
                .map_err(|e| Failure::new(ExitClass::Parse, "refine", format!("{}: {e}", page_dir.display())))?;
            let snapshots = commands::load_snapshots(&snapshot)?;
            let client = commands::make_client(&cfg, None)?;
            commands::refine(&page, &tree, &mockup, &snapshots, &client, &cfg, ws)?;
        }
        Command::Evaluate { pred_tree, truth_tree, pred_image, truth_image, report } => {
            let pred = EvalInput {
                tree: commands::load_metric_tree(&pred_tree)?,
                image: commands::load_optional_image(pred_image.as_deref())?,
            };
            let truth = EvalInput {
                tree: commands::load_metric_tree(&truth_tree)?,
                image: commands::load_optional_image(truth_image.as_deref())?,
            };
            let path = report.unwrap_or_else(|| ws.path(commands::REPORT_FILE));
            commands::report(&pred, &truth, &path, ws)?;
        }
        Command::Run(args) => {
            let client = commands::make_client(&cfg, None)?;
            commands::run(&pipeline_inputs(&args), &client, &cfg, ws)?;
        }
        Command::Record(args) => record(&args, cfg, ws)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = resolve_config(cli.global).and_then(|cfg| execute(cli.command, cfg));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

