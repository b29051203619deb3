//! Self-correcting refinement: compare each rendered component with its region of the
//! design, ask for repair suggestions, repair the affected units concurrently and merge
//! them back in tree order.

mod snapshot;
mod synthetic;

pub use snapshot::{load_render_snapshot, parse_snapshot_file, RenderSnapshot, SnapshotElement, SnapshotFile};
pub use synthetic::{perturb, random_perturbations, render_tree, Perturbation};

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

use crate::codegen::{component_names, validate_unit, CodeUnit, GeneratedPage};
use crate::grouping::{ComponentNode, ComponentTree};
use crate::llm::{bindings, AskError, LlmClient, LlmError, PromptTemplate, TemplateName};
use crate::metadata::{crop_region, BBox, MetadataError, Mockup};

/// Suggestion used for containers that never showed up in the render.
pub const ABSENT_SUGGESTION: &str = "component absent in render";
/// Suggestion used for containers rendered with zero area.
pub const EMPTY_RENDER_SUGGESTION: &str =
    "component rendered with zero area; restore its size and make its content visible";

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Metadata(MetadataError),
    #[error("stage `{stage}`, node {node}: {source}")]
    Llm {
        stage: TemplateName,
        node: String,
        #[source]
        source: LlmError,
    },
    #[error("stage `{stage}`, node {node}: unparseable response: {message}")]
    ResponseParse {
        stage: TemplateName,
        node: String,
        message: String,
    },
    #[error("node {node} was judged ok; there is nothing to repair")]
    NothingToRepair { node: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    NeedsRepair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairSuggestion {
    pub node_id: String,
    pub verdict: Verdict,
    pub text: String,
}

/// Design and render crops of one component.
#[derive(Debug, Clone)]
pub struct ComponentPair {
    pub node_id: String,
    pub original_crop: RgbaImage,
    pub rendered_crop: RgbaImage,
    pub original_bbox: BBox,
    pub rendered_bbox: BBox,
}

/// A tree container found in the render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchedBoxes {
    pub original: BBox,
    pub rendered: BBox,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComponentMatch {
    /// Matched containers in bottom-up tree order.
    pub pairs: Vec<(String, MatchedBoxes)>,
    /// Tree containers absent from the render.
    pub unmatched_tree: Vec<String>,
    /// Rendered ids that name no tree node.
    pub unmatched_snapshot: Vec<String>,
}

/// Match tree containers (root included) to rendered elements by id.
pub fn match_components(tree: &ComponentTree, snapshot: &RenderSnapshot) -> ComponentMatch {
    let rendered: HashMap<&str, BBox> = snapshot.elements.iter().map(|e| (e.id.as_str(), e.bbox)).collect();
    let mut m = ComponentMatch::default();
    for node in tree.root.containers_postorder() {
        match rendered.get(node.id.as_str()) {
            Some(&r) => m.pairs.push((node.id.clone(), MatchedBoxes { original: node.bbox, rendered: r })),
            None => m.unmatched_tree.push(node.id.clone()),
        }
    }
    let known: HashSet<&str> = tree.root.preorder().into_iter().map(|n| n.id.as_str()).collect();
    m.unmatched_snapshot = snapshot
        .elements
        .iter()
        .filter(|e| !known.contains(e.id.as_str()))
        .map(|e| e.id.clone())
        .collect();
    m
}

/// Crop the design screenshot at the original bbox and the render at the rendered one.
pub fn extract_pair_images(
    mockup: &Mockup,
    snapshot: &RenderSnapshot,
    node_id: &str,
    boxes: MatchedBoxes,
) -> Result<ComponentPair, MetadataError> {
    Ok(ComponentPair {
        node_id: node_id.to_string(),
        original_crop: crop_region(&mockup.screenshot, &boxes.original)?,
        rendered_crop: crop_region(&snapshot.screenshot, &boxes.rendered)?,
        original_bbox: boxes.original,
        rendered_bbox: boxes.rendered,
    })
}

#[derive(Deserialize)]
struct AnalysisAnswer {
    verdict: Verdict,
    #[serde(default)]
    suggestion: String,
}

/// Parse a verdict answer. A repair verdict must come with a suggestion.
pub fn parse_analysis_response(text: &str) -> Result<(Verdict, String), String> {
    let a: AnalysisAnswer = crate::llm::parse_json_response(text)?;
    let suggestion = a.suggestion.trim().to_string();
    if a.verdict == Verdict::NeedsRepair && suggestion.is_empty() {
        return Err("verdict needs_repair without a suggestion".into());
    }
    Ok((a.verdict, suggestion))
}

/// Compare the two crops of a component and return the model's verdict.
pub fn analyze_pair(pair: &ComponentPair, label: &str, client: &LlmClient) -> Result<RepairSuggestion, RefineError> {
    let stage = TemplateName::Analysis;
    let request = PromptTemplate::builtin(stage)
        .render(
            &bindings([("component", format!("{label} ({})", pair.node_id))]),
            vec![Arc::new(pair.original_crop.clone()), Arc::new(pair.rendered_crop.clone())],
            client.decoding,
        )
        .map_err(|e| RefineError::Llm { stage, node: pair.node_id.clone(), source: e })?;
    let (verdict, text) = client
        .ask_parsed(&request, parse_analysis_response)
        .map_err(|e| stage_error(stage, &pair.node_id, e))?;
    Ok(RepairSuggestion {
        node_id: pair.node_id.clone(),
        verdict,
        text,
    })
}

fn stage_error(stage: TemplateName, node: &str, e: AskError<String>) -> RefineError {
    match e {
        AskError::Llm(source) => RefineError::Llm { stage, node: node.to_string(), source },
        AskError::Invalid(message) => RefineError::ResponseParse { stage, node: node.to_string(), message },
    }
}

#[derive(Deserialize)]
struct RepairAnswer {
    source: String,
}

pub fn parse_repair_response(text: &str) -> Result<String, String> {
    let a: RepairAnswer = crate::llm::parse_json_response(text)?;
    if a.source.trim().is_empty() {
        return Err("empty source".into());
    }
    Ok(a.source)
}

/// How a repair attempt ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairOutcome {
    Replaced,
    /// The repair failed to parse or validate; the original unit was kept.
    Kept,
}

/// Ask for a corrected version of `unit`. Repairs that do not parse or fail node-id
/// and tag validation leave the original unit in place.
pub fn repair_component(
    unit: &CodeUnit,
    suggestion: &RepairSuggestion,
    tree: &ComponentTree,
    client: &LlmClient,
) -> Result<(CodeUnit, RepairOutcome), RefineError> {
    if suggestion.verdict == Verdict::Ok {
        return Err(RefineError::NothingToRepair { node: unit.node_id.clone() });
    }
    let stage = TemplateName::Repair;
    let request = PromptTemplate::builtin(stage)
        .render(
            &bindings([("code", unit.source.clone()), ("suggestion", suggestion.text.clone())]),
            vec![],
            client.decoding,
        )
        .map_err(|e| RefineError::Llm { stage, node: unit.node_id.clone(), source: e })?;
    let source = match client.ask_parsed(&request, parse_repair_response) {
        Ok(s) => s,
        Err(AskError::Invalid(message)) => {
            log::warn!("repair of {} unparseable ({message}); keeping original", unit.node_id);
            return Ok((unit.clone(), RepairOutcome::Kept));
        }
        Err(e) => return Err(stage_error(stage, &unit.node_id, e)),
    };
    let names = component_names(&tree.root);
    let node = tree.root.find(&unit.node_id).expect("unit node is in the tree");
    let scope = division_scope(&tree.root, &unit.node_id);
    match validate_unit(&source, node, scope, &names) {
        Ok(dependencies) => Ok((
            CodeUnit {
                source,
                dependencies,
                ..unit.clone()
            },
            RepairOutcome::Replaced,
        )),
        Err(e) => {
            log::warn!("repair of {} rejected ({e}); keeping original", unit.node_id);
            Ok((unit.clone(), RepairOutcome::Kept))
        }
    }
}

/// The division sub-tree holding `id`; the whole tree for the root.
fn division_scope<'a>(root: &'a ComponentNode, id: &str) -> &'a ComponentNode {
    root.children
        .iter()
        .find(|c| c.find(id).is_some())
        .unwrap_or(root)
}

/// One line of the refinement log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineLogEntry {
    pub round: usize,
    pub node_id: String,
    pub verdict: Verdict,
    pub suggestion: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<RepairOutcome>,
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub page: GeneratedPage,
    pub log: Vec<RefineLogEntry>,
    /// Rounds actually run.
    pub rounds: usize,
}

/// Up to `rounds` rounds of match → analyze → repair → merge, one snapshot per round.
/// Stops early after a round without repairs or when no fresh snapshot is left.
pub fn refine_page(
    page: &GeneratedPage,
    tree: &ComponentTree,
    mockup: &Mockup,
    snapshots: &[RenderSnapshot],
    client: &LlmClient,
    rounds: usize,
) -> Result<Refined, RefineError> {
    let names: BTreeMap<String, String> = component_names(&tree.root);
    let mut page = page.clone();
    let mut log = Vec::new();
    let mut ran = 0;
    for (round, snapshot) in snapshots.iter().take(rounds).enumerate() {
        ran += 1;
        let suggestions = analyze_round(tree, mockup, snapshot, &names, client)?;
        let todo: Vec<RepairSuggestion> = suggestions
            .iter()
            .filter(|s| s.verdict == Verdict::NeedsRepair && page.unit(&s.node_id).is_some())
            .cloned()
            .collect();
        let repaired = client.map_concurrent(todo, |s| {
            let unit = page.unit(&s.node_id).expect("filtered above");
            repair_component(unit, &s, tree, client).map(|r| (s.node_id.clone(), r))
        });
        let mut outcomes: HashMap<String, (CodeUnit, RepairOutcome)> = HashMap::new();
        for r in repaired {
            let (id, r) = r?;
            outcomes.insert(id, r);
        }
        for s in suggestions {
            log.push(RefineLogEntry {
                round,
                outcome: outcomes.get(&s.node_id).map(|(_, o)| *o),
                node_id: s.node_id,
                verdict: s.verdict,
                suggestion: s.text,
            });
        }
        if outcomes.is_empty() {
            break;
        }
        for unit in &mut page.units {
            if let Some((new, RepairOutcome::Replaced)) = outcomes.remove(&unit.node_id) {
                *unit = new;
            }
        }
    }
    if ran < rounds {
        log::info!("refinement stopped after {ran} of {rounds} round(s)");
    }
    Ok(Refined { page, log, rounds: ran })
}

fn analyze_round(
    tree: &ComponentTree,
    mockup: &Mockup,
    snapshot: &RenderSnapshot,
    names: &BTreeMap<String, String>,
    client: &LlmClient,
) -> Result<Vec<RepairSuggestion>, RefineError> {
    let matched = match_components(tree, snapshot);
    for id in &matched.unmatched_snapshot {
        log::debug!("rendered element {id} matches no tree node");
    }
    let mut fixed: HashMap<String, RepairSuggestion> = matched
        .unmatched_tree
        .iter()
        .map(|id| (id.clone(), synthetic(id, ABSENT_SUGGESTION)))
        .collect();
    let mut pairs = Vec::new();
    for (id, boxes) in &matched.pairs {
        match extract_pair_images(mockup, snapshot, id, *boxes) {
            Ok(pair) => pairs.push(pair),
            Err(MetadataError::EmptyCrop(_)) => {
                fixed.insert(id.clone(), synthetic(id, EMPTY_RENDER_SUGGESTION));
            }
            Err(e) => return Err(RefineError::Metadata(e)),
        }
    }
    let analyzed = client.map_concurrent(pairs, |pair| analyze_pair(&pair, &names[&pair.node_id], client));
    for s in analyzed {
        let s = s?;
        fixed.insert(s.node_id.clone(), s);
    }
    // report in bottom-up tree order
    Ok(tree
        .root
        .containers_postorder()
        .into_iter()
        .filter_map(|n| fixed.remove(&n.id))
        .collect())
}

fn synthetic(id: &str, text: &str) -> RepairSuggestion {
    RepairSuggestion {
        node_id: id.to_string(),
        verdict: Verdict::NeedsRepair,
        text: text.to_string(),
    }
}
