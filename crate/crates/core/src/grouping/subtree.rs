use serde::Deserialize;
use serde_json::json;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::{ask_parsed, ComponentNode, Division, GroupingError, SemanticLayer, Tag};
use crate::llm::{bindings, LlmClient, PromptTemplate, TemplateName};
use crate::metadata::{crop_region, DesignDocument, Mockup};
use crate::naming::pascal_case;

/// One node of a grouping answer: a leaf (`layer_id`) or a named container.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct GroupAnswerNode {
    #[serde(default)]
    pub layer_id: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub children: Vec<GroupAnswerNode>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GroupAnswer {
    Node(GroupAnswerNode),
    Bare(Vec<GroupAnswerNode>),
}

/// Parse a grouping answer into the children of the division root.
pub fn parse_subtree_response(text: &str) -> Result<Vec<GroupAnswerNode>, String> {
    Ok(match crate::llm::parse_json_response::<GroupAnswer>(text)? {
        GroupAnswer::Bare(nodes) => nodes,
        GroupAnswer::Node(node) if node.layer_id.is_some() => vec![node],
        GroupAnswer::Node(node) => node.children,
    })
}

fn leaf_for(id: &str, doc: &DesignDocument, semantics: &HashMap<&str, &str>) -> Option<ComponentNode> {
    let layer = doc.layer(id)?;
    Some(ComponentNode::leaf(
        id,
        Tag::for_kind(layer.kind),
        layer.bbox,
        semantics.get(id).map(|s| s.to_string()),
    ))
}

fn convert(
    raw: &GroupAnswerNode,
    doc: &DesignDocument,
    semantics: &HashMap<&str, &str>,
) -> Vec<ComponentNode> {
    let children: Vec<ComponentNode> = raw
        .children
        .iter()
        .flat_map(|c| convert(c, doc, semantics))
        .collect();
    match &raw.layer_id {
        // a leaf listing children: the children are hoisted next to it
        Some(id) => leaf_for(id, doc, semantics).into_iter().chain(children).collect(),
        None if children.is_empty() => Vec::new(),
        None => {
            let name = pascal_case(raw.name.as_deref().unwrap_or(""), "Group");
            vec![ComponentNode::container(&name, children)]
        }
    }
}

/// Build the division sub-tree from a parsed answer, then post-process it.
pub fn build_subtree(
    answer: &[GroupAnswerNode],
    division: &Division,
    doc: &DesignDocument,
    semantics: &[SemanticLayer],
) -> ComponentNode {
    let sem: HashMap<&str, &str> = semantics
        .iter()
        .map(|s| (s.layer_id.as_str(), s.description.as_str()))
        .collect();
    let children = answer.iter().flat_map(|n| convert(n, doc, &sem)).collect();
    let root = ComponentNode::container(&division.label, children);
    postprocess_subtree(root, division, doc, semantics)
}

/// Remove leaves outside the division (and repeats), drop emptied containers.
fn prune(node: &mut ComponentNode, members: &HashSet<&str>, seen: &mut HashSet<String>) {
    node.children.retain_mut(|c| {
        if c.is_leaf() {
            members.contains(c.id.as_str()) && seen.insert(c.id.clone())
        } else {
            prune(c, members, seen);
            !c.children.is_empty()
        }
    });
}

/// Merge overlapping sibling containers, recompute bboxes bottom-up, sort children
/// into reading order and collapse containers holding a single leaf.
fn normalize(mut node: ComponentNode) -> ComponentNode {
    if node.is_leaf() {
        return node;
    }
    let mut children: Vec<ComponentNode> =
        std::mem::take(&mut node.children).into_iter().map(normalize).collect();
    while let Some((i, j)) = first_overlapping_containers(&children) {
        let mut b = children.remove(j);
        let mut a = children.remove(i);
        let mut kids = std::mem::take(&mut a.children);
        kids.append(&mut b.children);
        let mut keep = if b.bbox.area() > a.bbox.area() { b } else { a };
        keep.children = kids;
        children.insert(i, normalize(keep));
    }
    node.children = children;
    node.refresh_bbox();
    node.sort_children();
    if node.children.len() == 1 && node.children[0].is_leaf() {
        return node.children.pop().unwrap();
    }
    node
}

fn first_overlapping_containers(children: &[ComponentNode]) -> Option<(usize, usize)> {
    for i in 0..children.len() {
        if children[i].is_leaf() {
            continue;
        }
        for j in i + 1..children.len() {
            if children[j].is_container() && children[i].bbox.overlaps(&children[j].bbox) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Correct a parsed sub-tree against its division: phantom leaves removed, missing
/// member layers appended under the root, overlapping sibling containers merged,
/// single-leaf containers collapsed, bboxes recomputed and children re-sorted.
pub fn postprocess_subtree(
    mut node: ComponentNode,
    division: &Division,
    doc: &DesignDocument,
    semantics: &[SemanticLayer],
) -> ComponentNode {
    let members: HashSet<&str> = division.layer_ids.iter().map(String::as_str).collect();
    let sem: HashMap<&str, &str> = semantics
        .iter()
        .map(|s| (s.layer_id.as_str(), s.description.as_str()))
        .collect();
    let mut seen = HashSet::new();
    if node.is_leaf() {
        let keep = members.contains(node.id.as_str()).then_some(node);
        node = ComponentNode::container(&division.label, keep.into_iter().collect());
    }
    prune(&mut node, &members, &mut seen);
    for id in &division.layer_ids {
        if !seen.contains(id) {
            if let Some(leaf) = leaf_for(id, doc, &sem) {
                node.children.push(leaf);
            }
        }
    }
    normalize(node)
}

fn semantics_payload(semantics: &[SemanticLayer], doc: &DesignDocument) -> String {
    let items: Vec<_> = semantics
        .iter()
        .map(|s| {
            let layer = doc.layer(&s.layer_id);
            json!({
                "layer_id": s.layer_id,
                "type": layer.map(|l| l.kind),
                "bbox": layer.map(|l| l.bbox),
                "description": s.description,
                "role": s.role_hint,
            })
        })
        .collect();
    serde_json::to_string_pretty(&items).unwrap()
}

/// Ask the model to organize the division's layers into a component sub-tree.
pub fn group(
    division: &Division,
    semantics: &[SemanticLayer],
    mockup: &Mockup,
    client: &LlmClient,
) -> Result<ComponentNode, GroupingError> {
    let sub_image = crop_region(&mockup.screenshot, &division.bbox)
        .map_err(|e| GroupingError::Metadata { division: Some(division.id.clone()), source: e })?;
    let request = PromptTemplate::builtin(TemplateName::Group)
        .render(
            &bindings([
                ("label", division.label.clone()),
                ("semantics", semantics_payload(semantics, &mockup.doc)),
            ]),
            vec![Arc::new(sub_image)],
            client.decoding,
        )
        .map_err(|e| GroupingError::llm(TemplateName::Group, Some(&division.id), e))?;
    let answer = ask_parsed(client, &request, Some(&division.id), parse_subtree_response)?;
    Ok(build_subtree(&answer, division, &mockup.doc, semantics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::{BBox, Layer, LayerKind, Screen};
    use proptest::prelude::*;

    fn doc(layers: &[(&str, LayerKind, BBox)]) -> DesignDocument {
        DesignDocument {
            screen: Screen { width: 400, height: 800 },
            screenshot: "shot.png".into(),
            layers: layers
                .iter()
                .map(|(id, kind, bbox)| Layer {
                    id: id.to_string(),
                    kind: *kind,
                    bbox: *bbox,
                    style: Default::default(),
                    text: None,
                })
                .collect(),
        }
    }

    fn division(doc: &DesignDocument) -> Division {
        Division {
            id: "div_0".into(),
            label: "SearchSection".into(),
            layer_ids: doc.layers.iter().map(|l| l.id.clone()).collect(),
            bbox: bbox_union_of(doc),
        }
    }

    fn bbox_union_of(doc: &DesignDocument) -> BBox {
        let boxes: Vec<BBox> = doc.layers.iter().map(|l| l.bbox).collect();
        crate::metadata::bbox_union(&boxes).unwrap()
    }

    fn search_doc() -> DesignDocument {
        doc(&[
            ("bg_1", LayerKind::Shape, BBox::new(0, 0, 300, 60)),
            ("ic_1", LayerKind::Icon, BBox::new(10, 10, 20, 20)),
            ("txt_1", LayerKind::Text, BBox::new(40, 10, 200, 20)),
            ("txt_2", LayerKind::Text, BBox::new(10, 40, 100, 15)),
        ])
    }

    fn answer(json: &str) -> Vec<GroupAnswerNode> {
        parse_subtree_response(json).unwrap()
    }

    #[test]
    fn container_plus_direct_leaves() {
        let d = search_doc();
        let tree = build_subtree(
            &answer(
                r#"{"name":"SearchSection","children":[
                    {"layer_id":"bg_1"},
                    {"name":"search bar","children":[{"layer_id":"ic_1"},{"layer_id":"txt_1"}]},
                    {"layer_id":"txt_2"}]}"#,
            ),
            &division(&d),
            &d,
            &[],
        );
        assert_eq!(tree.id, "merged_SearchSection");
        let ids: Vec<&str> = tree.children.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["bg_1", "merged_SearchBar", "txt_2"]);
        assert_eq!(tree.children[1].bbox, BBox::new(10, 10, 230, 20));
        assert_eq!(tree.bbox, BBox::new(0, 0, 300, 60));
    }

    #[test]
    fn phantom_leaves_are_dropped_and_missing_ones_appended() {
        let d = search_doc();
        let tree = build_subtree(
            &answer(r#"[{"layer_id":"ghost_1"},{"layer_id":"bg_1"},{"layer_id":"ic_1"},{"layer_id":"txt_1"}]"#),
            &division(&d),
            &d,
            &[],
        );
        let mut leaves = tree.leaf_ids();
        leaves.sort_unstable();
        assert_eq!(leaves, ["bg_1", "ic_1", "txt_1", "txt_2"]);
        assert!(tree.find("ghost_1").is_none());
    }

    #[test]
    fn overlapping_sibling_containers_merge_under_the_larger_name() {
        let d = search_doc();
        let tree = build_subtree(
            &answer(
                r#"[{"name":"Small","children":[{"layer_id":"ic_1"},{"layer_id":"txt_1"}]},
                    {"name":"Big","children":[{"layer_id":"bg_1"},{"layer_id":"txt_2"}]}]"#,
            ),
            &division(&d),
            &d,
            &[],
        );
        // the merged container is the only child, so it stays a container
        assert_eq!(tree.children.len(), 1);
        let merged = &tree.children[0];
        assert_eq!(merged.id, "merged_Big");
        assert_eq!(merged.children.len(), 4);
    }

    #[test]
    fn single_leaf_container_collapses() {
        let d = search_doc();
        let tree = build_subtree(
            &answer(
                r#"[{"name":"Wrap","children":[{"layer_id":"ic_1"}]},
                    {"layer_id":"bg_1"},{"layer_id":"txt_1"},{"layer_id":"txt_2"}]"#,
            ),
            &division(&d),
            &d,
            &[],
        );
        assert!(tree.find("merged_Wrap").is_none());
        assert!(tree.children.iter().any(|c| c.id == "ic_1"));
    }

    #[test]
    fn single_layer_division_is_a_leaf() {
        let d = doc(&[("only", LayerKind::Text, BBox::new(5, 5, 50, 10))]);
        let tree = build_subtree(&[], &division(&d), &d, &[]);
        assert!(tree.is_leaf());
        assert_eq!(tree.id, "only");
    }

    #[test]
    fn valid_tree_is_unchanged() {
        let d = search_doc();
        let div = division(&d);
        let once = build_subtree(
            &answer(r#"[{"name":"Bar","children":[{"layer_id":"ic_1"},{"layer_id":"txt_1"}]}]"#),
            &div,
            &d,
            &[],
        );
        assert_eq!(postprocess_subtree(once.clone(), &div, &d, &[]), once);
    }

    fn arb_answer(ids: Vec<String>) -> impl Strategy<Value = Vec<GroupAnswerNode>> {
        let leaf = prop::sample::select(ids).prop_map(|id| GroupAnswerNode {
            layer_id: Some(id),
            name: None,
            children: vec![],
        });
        let node = leaf.prop_recursive(3, 24, 4, |inner| {
            (prop::collection::vec(inner, 0..4), "[A-C]").prop_map(|(children, name)| {
                GroupAnswerNode { layer_id: None, name: Some(name), children }
            })
        });
        prop::collection::vec(node, 0..6)
    }

    fn arb_case() -> impl Strategy<Value = (DesignDocument, Vec<GroupAnswerNode>)> {
        prop::collection::vec((0i64..300, 0i64..300, 0i64..80, 0i64..80), 1..10).prop_flat_map(|boxes| {
            let layers: Vec<(String, BBox)> = boxes
                .iter()
                .enumerate()
                .map(|(i, &(x, y, w, h))| (format!("l{i}"), BBox::new(x, y, w, h)))
                .collect();
            let mut ids: Vec<String> = layers.iter().map(|(id, _)| id.clone()).collect();
            ids.push("ghost".into());
            let d = DesignDocument {
                screen: Screen { width: 400, height: 400 },
                screenshot: "s.png".into(),
                layers: layers
                    .into_iter()
                    .map(|(id, bbox)| Layer {
                        id,
                        kind: LayerKind::Shape,
                        bbox,
                        style: Default::default(),
                        text: None,
                    })
                    .collect(),
            };
            (Just(d), arb_answer(ids))
        })
    }

    proptest! {
        #[test]
        fn postprocess_is_idempotent_and_complete((d, ans) in arb_case()) {
            let div = division(&d);
            let once = build_subtree(&ans, &div, &d, &[]);
            let twice = postprocess_subtree(once.clone(), &div, &d, &[]);
            prop_assert_eq!(&once, &twice);
            let mut leaves = once.leaf_ids();
            leaves.sort_unstable();
            let mut want: Vec<&str> = div.layer_ids.iter().map(String::as_str).collect();
            want.sort_unstable();
            prop_assert_eq!(leaves, want);
            for n in once.preorder() {
                if n.is_container() {
                    let boxes: Vec<BBox> = n.children.iter().map(|c| c.bbox).collect();
                    prop_assert_eq!(n.bbox, crate::metadata::bbox_union(&boxes).unwrap());
                    let cs: Vec<_> = n.children.iter().filter(|c| c.is_container()).collect();
                    for (i, a) in cs.iter().enumerate() {
                        for b in &cs[i + 1..] {
                            prop_assert!(!a.bbox.overlaps(&b.bbox));
                        }
                    }
                }
            }
        }
    }
}
