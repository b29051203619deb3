//! The pipeline stages as commands over files.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use designcoder::codegen::{generate_page, GeneratedPage};
use designcoder::grouping::{run_grouping_chain, ComponentTree};
use designcoder::llm::{LiveBackend, LlmBackend, LlmClient, RecordingBackend, ReplayBackend, TranscriptStore};
use designcoder::metadata::{load_image, Mockup};
use designcoder::metrics::{evaluate, parse_metric_tree, EmbedClient, EvalInput, MetricReport, MetricTree};
use designcoder::refine::{load_render_snapshot, refine_page, RefineLogEntry, RenderSnapshot};

use crate::config::{BackendMode, RunConfig};
use crate::failure::{self, ExitClass, Failure};
use crate::workspace::Workspace;

pub const TREE_FILE: &str = "tree.json";
pub const PAGE_DIR: &str = "page";
pub const REFINED_DIR: &str = "refined";
pub const REFINE_LOG: &str = "refine_log.json";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// The backend the config selects. With `record`, exchanges are also written to it.
pub fn make_client(cfg: &RunConfig, record: Option<Arc<TranscriptStore>>) -> Result<LlmClient, Failure> {
    cfg.check_backend()?;
    let b = &cfg.backend;
    let backend: Arc<dyn LlmBackend> = match b.mode {
        BackendMode::Replay => {
            let path = b.transcript_path.as_ref().expect("checked");
            let store = TranscriptStore::load(path).map_err(|e| failure::llm("backend", e))?;
            Arc::new(ReplayBackend::new(Arc::new(store)))
        }
        BackendMode::Live => {
            let live = LiveBackend::from_env(
                b.base_url.as_deref().expect("checked"),
                b.model.as_deref().expect("checked"),
                cfg.max_concurrency,
            )
            .map_err(|e| failure::llm("backend", e))?;
            Arc::new(live)
        }
    };
    let backend = match record {
        Some(store) => Arc::new(RecordingBackend::new(backend, store)) as Arc<dyn LlmBackend>,
        None => backend,
    };
    Ok(LlmClient::new(backend, cfg.max_concurrency))
}

pub fn load_mockup(stage: &'static str, path: &Path) -> Result<Mockup, Failure> {
    Mockup::load(path).map_err(|e| failure::metadata(stage, e))
}

fn read_text(stage: &'static str, path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(ExitClass::Parse, stage, format!("cannot read {}: {e}", path.display())))
}

/// Read a component tree and check it against the document.
pub fn load_tree(stage: &'static str, path: &Path, mockup: &Mockup) -> Result<ComponentTree, Failure> {
    let tree = ComponentTree::from_json(&read_text(stage, path)?)
        .map_err(|e| Failure::new(ExitClass::Parse, stage, format!("{}: {e}", path.display())))?;
    tree.check_invariants(&mockup.doc)
        .map_err(|e| Failure::new(ExitClass::Invariant, stage, format!("{}: {e}", path.display())))?;
    Ok(tree)
}

pub fn load_snapshots(paths: &[PathBuf]) -> Result<Vec<RenderSnapshot>, Failure> {
    paths
        .iter()
        .map(|p| load_render_snapshot(p).map_err(failure::refine))
        .collect()
}

pub fn group(mockup: &Mockup, client: &LlmClient, ws: &mut Workspace) -> Result<ComponentTree, Failure> {
    let tree = run_grouping_chain(mockup, client).map_err(failure::grouping)?;
    tree.check_invariants(&mockup.doc)
        .map_err(|e| Failure::new(ExitClass::Invariant, "group", e))?;
    ws.write(TREE_FILE, &tree.to_json())?;
    ws.log("group: ok");
    Ok(tree)
}

pub fn generate(
    tree: &ComponentTree,
    mockup: &Mockup,
    client: &LlmClient,
    cfg: &RunConfig,
    ws: &mut Workspace,
) -> Result<(ComponentTree, GeneratedPage), Failure> {
    let (styled, page) = generate_page(tree, mockup, client, cfg.style_mode.into()).map_err(failure::codegen)?;
    page.write_to(&styled, &ws.path(PAGE_DIR)).map_err(failure::codegen)?;
    ws.log(&format!("generate: ok, {} components", page.units.len()));
    Ok((styled, page))
}

#[derive(Serialize)]
struct RefineLog<'a> {
    rounds: usize,
    entries: &'a [RefineLogEntry],
}

pub fn refine(
    page: &GeneratedPage,
    tree: &ComponentTree,
    mockup: &Mockup,
    snapshots: &[RenderSnapshot],
    client: &LlmClient,
    cfg: &RunConfig,
    ws: &mut Workspace,
) -> Result<GeneratedPage, Failure> {
    let refined = refine_page(page, tree, mockup, snapshots, client, cfg.refine_rounds).map_err(failure::refine)?;
    refined.page.write_to(tree, &ws.path(REFINED_DIR)).map_err(failure::codegen)?;
    let log = RefineLog { rounds: refined.rounds, entries: &refined.log };
    let mut json = serde_json::to_string_pretty(&log).expect("log serializes");
    json.push('\n');
    ws.write(REFINE_LOG, &json)?;
    let repaired = refined.log.iter().filter(|e| e.outcome.is_some()).count();
    ws.log(&format!("refine: ok, {} round(s), {repaired} repair attempt(s)", refined.rounds));
    Ok(refined.page)
}

pub fn load_metric_tree(path: &Path) -> Result<MetricTree, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::new(ExitClass::Parse, "evaluate", format!("cannot read {}: {e}", path.display())))?;
    parse_metric_tree(&bytes).map_err(|e| Failure::new(ExitClass::Parse, "evaluate", format!("{}: {e}", path.display())))
}

pub fn load_optional_image(path: Option<&Path>) -> Result<Option<designcoder::image::RgbaImage>, Failure> {
    path.map(|p| load_image(p).map_err(|e| failure::metadata("evaluate", e)))
        .transpose()
}

/// Score, write the report and print the table.
pub fn report(pred: &EvalInput, truth: &EvalInput, path: &Path, ws: &mut Workspace) -> Result<MetricReport, Failure> {
    let embed = if pred.image.is_some() && truth.image.is_some() { EmbedClient::from_env() } else { None };
    let report = evaluate(pred, truth, embed.as_ref()).map_err(failure::metrics)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| Failure::new(ExitClass::Io, "evaluate", format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, report.to_json())
        .map_err(|e| Failure::new(ExitClass::Io, "evaluate", format!("{}: {e}", path.display())))?;
    print!("{}", report.table());
    ws.log("evaluate: ok");
    Ok(report)
}

/// Files of a pipeline run, relative to the output directory.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tree: String,
    pub page: String,
    /// The refined page, or `skipped`.
    pub refine: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_log: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    pub run_log: String,
}

pub struct RunInputs<'a> {
    pub doc: &'a Path,
    pub snapshots: &'a [PathBuf],
    pub truth: Option<&'a Path>,
    pub truth_image: Option<&'a Path>,
}

/// group → generate → refine (with snapshots) → evaluate (with a truth tree) → manifest.
pub fn run(inputs: &RunInputs, client: &LlmClient, cfg: &RunConfig, ws: &mut Workspace) -> Result<Manifest, Failure> {
    let mockup = load_mockup("run", inputs.doc)?;
    let snapshots = load_snapshots(inputs.snapshots)?;
    let truth_tree = inputs.truth.map(load_metric_tree).transpose()?;
    let truth_image = load_optional_image(inputs.truth_image)?;
    let tree = group(&mockup, client, ws)?;
    let (styled, page) = generate(&tree, &mockup, client, cfg, ws)?;
    let mut manifest = Manifest {
        tree: TREE_FILE.into(),
        page: format!("{PAGE_DIR}/page.src"),
        refine: "skipped".into(),
        refine_log: None,
        report: None,
        run_log: crate::workspace::RUN_LOG.into(),
    };
    if snapshots.is_empty() {
        ws.log("refine: skipped");
    } else {
        refine(&page, &styled, &mockup, &snapshots, client, cfg, ws)?;
        manifest.refine = format!("{REFINED_DIR}/page.src");
        manifest.refine_log = Some(REFINE_LOG.into());
    }
    if let Some(truth) = truth_tree {
        // the latest render stands in for the page's appearance
        let pred_image = snapshots.last().map(|s| s.screenshot.clone());
        let truth_image = match (truth_image, &pred_image) {
            (Some(img), _) => Some(img),
            (None, Some(_)) => Some(mockup.screenshot.clone()),
            (None, None) => None,
        };
        let pred = EvalInput { tree: MetricTree::new(designcoder::metrics::MetricNode::from_component(&styled.root)), image: pred_image };
        let truth = EvalInput { tree: truth, image: truth_image };
        report(&pred, &truth, &ws.path(REPORT_FILE), ws)?;
        manifest.report = Some(REPORT_FILE.into());
    }
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    ws.write(MANIFEST_FILE, &json)?;
    ws.log("run: ok");
    Ok(manifest)
}
