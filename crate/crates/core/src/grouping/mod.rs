//! The grouping chain: divide the screen into regions, describe each region's layers,
//! group them into component sub-trees and assemble the full tree.

mod division;
mod semantics;
mod subtree;
mod tree;

pub use division::{
    check_and_postprocess, is_background, parse_divisions_response, CorrectedDivisions, Division,
    ProposedDivision, RollbackNeeded, BACKGROUND_COVERAGE, MAX_DIVISIONS, MIN_DIVISIONS,
};
pub use semantics::{
    annotate_outlines, extract_semantics, parse_semantics_response, RoleHint, SemanticLayer,
    MIN_DESCRIPTION_CHARS,
};
pub use subtree::{build_subtree, group, parse_subtree_response, postprocess_subtree, GroupAnswerNode};
pub use tree::{ComponentNode, ComponentTree, Tag, CONTAINER_PREFIX, ROOT_ID, ROOT_NAME};

use std::collections::HashSet;
use std::sync::Arc;
use thiserror::Error;

use crate::llm::{bindings, AskError, LlmClient, LlmError, LlmRequest, PromptTemplate, TemplateName};
use crate::metadata::{extract_layer_list, MetadataError, Mockup};
use crate::naming::unique_name;

/// Re-asks of the division prompt after an out-of-range region count.
pub const ROLLBACK_BUDGET: usize = 2;

#[derive(Debug, Error)]
pub enum GroupingError {
    #[error("stage `{stage}`{}: {source}", division_suffix(.division))]
    Llm {
        stage: TemplateName,
        division: Option<String>,
        #[source]
        source: LlmError,
    },
    #[error("stage `{stage}`{}: unparseable response: {message}", division_suffix(.division))]
    ResponseParse {
        stage: TemplateName,
        division: Option<String>,
        message: String,
    },
    #[error("stage `divide`: {count} regions after {attempts} attempts; between 3 and 10 required")]
    DivisionCount { count: usize, attempts: usize },
    #[error("{subtrees} sub-trees for {divisions} divisions")]
    ArityMismatch { subtrees: usize, divisions: usize },
    #[error("grouping{}: {source}", division_suffix(.division))]
    Metadata {
        division: Option<String>,
        #[source]
        source: MetadataError,
    },
}

fn division_suffix(d: &Option<String>) -> String {
    d.as_ref().map(|d| format!(", division {d}")).unwrap_or_default()
}

impl GroupingError {
    pub(crate) fn llm(stage: TemplateName, division: Option<&str>, source: LlmError) -> Self {
        GroupingError::Llm {
            stage,
            division: division.map(str::to_string),
            source,
        }
    }
}

/// [`LlmClient::ask_parsed`] with grouping error context.
pub(crate) fn ask_parsed<T>(
    client: &LlmClient,
    request: &LlmRequest,
    division: Option<&str>,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<T, GroupingError> {
    let stage = request.template;
    client.ask_parsed(request, parse).map_err(|e| match e {
        AskError::Llm(e) => GroupingError::llm(stage, division, e),
        AskError::Invalid(message) => GroupingError::ResponseParse {
            stage,
            division: division.map(str::to_string),
            message,
        },
    })
}

/// Split the layer list into corrected regions.
pub fn divide(mockup: &Mockup, client: &LlmClient) -> Result<CorrectedDivisions, GroupingError> {
    let doc = &mockup.doc;
    let layers = extract_layer_list(doc);
    let base = PromptTemplate::builtin(TemplateName::Divide)
        .render(
            &bindings([
                ("layer_list", serde_json::to_string_pretty(&layers).unwrap()),
                ("width", doc.screen.width.to_string()),
                ("height", doc.screen.height.to_string()),
            ]),
            vec![Arc::new(mockup.screenshot.clone())],
            client.decoding,
        )
        .map_err(|e| GroupingError::llm(TemplateName::Divide, None, e))?;
    let screen = doc.screen.rect();
    let mut request = base.clone();
    for attempt in 0..=ROLLBACK_BUDGET {
        let proposed = ask_parsed(client, &request, None, parse_divisions_response)?;
        match check_and_postprocess(&proposed, &layers, &screen) {
            Ok(corrected) => return Ok(corrected),
            Err(RollbackNeeded { count }) if attempt < ROLLBACK_BUDGET => {
                log::warn!("divide: {count} regions, rolling back");
                request = base.clone().with_note(&format!(
                    "Attempt {}: your previous answer had {count} regions. Please produce between 3 and 10 regions.",
                    attempt + 2
                ));
            }
            Err(RollbackNeeded { count }) => {
                return Err(GroupingError::DivisionCount {
                    count,
                    attempts: attempt + 1,
                })
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Put the sub-trees under a screen-sized root: background layers first, then one
/// sub-tree per division in reading order. Container ids are made unique.
pub fn assemble_tree(
    subtrees: Vec<ComponentNode>,
    corrected: &CorrectedDivisions,
    mockup: &Mockup,
) -> Result<ComponentTree, GroupingError> {
    if subtrees.len() != corrected.divisions.len() {
        return Err(GroupingError::ArityMismatch {
            subtrees: subtrees.len(),
            divisions: corrected.divisions.len(),
        });
    }
    let doc = &mockup.doc;
    let mut pairs: Vec<_> = corrected.divisions.iter().cloned().zip(subtrees).collect();
    pairs.sort_by_key(|(d, _)| d.bbox.reading_key());
    let mut children: Vec<ComponentNode> = corrected
        .background
        .iter()
        .filter_map(|id| doc.layer(id))
        .map(|l| {
            ComponentNode::leaf(
                &l.id,
                Tag::for_kind(l.kind),
                l.bbox,
                Some("background layer".to_string()),
            )
        })
        .collect();
    let (divisions, subtrees): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    children.extend(subtrees);
    let mut root = ComponentNode {
        id: ROOT_ID.to_string(),
        name: ROOT_NAME.to_string(),
        tag: Tag::View,
        bbox: doc.screen.rect(),
        semantic: None,
        style: Default::default(),
        children,
    };
    let mut taken: HashSet<String> = doc.layers.iter().map(|l| l.id.clone()).collect();
    uniquify(&mut root, &mut taken);
    Ok(ComponentTree { root, divisions })
}

fn uniquify(node: &mut ComponentNode, taken: &mut HashSet<String>) {
    if node.is_container() {
        node.id = unique_name(&node.id, taken);
        if let Some(name) = node.id.strip_prefix(CONTAINER_PREFIX) {
            node.name = name.to_string();
        }
    }
    for c in &mut node.children {
        uniquify(c, taken);
    }
}

/// Run divide → (semantics → group per division, concurrently) → assemble.
pub fn run_grouping_chain(mockup: &Mockup, client: &LlmClient) -> Result<ComponentTree, GroupingError> {
    let corrected = divide(mockup, client)?;
    let results = client.map_concurrent(corrected.divisions.clone(), |division| {
        let semantics = extract_semantics(&division, mockup, client)?;
        group(&division, &semantics, mockup, client)
    });
    let subtrees = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    assemble_tree(subtrees, &corrected, mockup)
}
