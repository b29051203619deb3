use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, LazyLock};

use super::CodegenError;
use crate::grouping::{ComponentNode, Tag, ROOT_ID, ROOT_NAME};
use crate::llm::{bindings, AskError, LlmClient, PromptTemplate, TemplateName};
use crate::metadata::{crop_region, BBox};
use crate::naming::{pascal_case, unique_name};
use image::RgbaImage;

/// Generated source of one container component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeUnit {
    pub node_id: String,
    pub component_name: String,
    pub source: String,
    /// Names of child container components the source renders.
    pub dependencies: Vec<String>,
}

/// Component name of every container, keyed by node id. The root is `Page`.
pub fn component_names(root: &ComponentNode) -> BTreeMap<String, String> {
    let mut taken: HashSet<String> = HashSet::from([ROOT_NAME.to_string()]);
    let mut names = BTreeMap::new();
    for node in root.preorder() {
        if node.id == ROOT_ID {
            names.insert(node.id.clone(), ROOT_NAME.to_string());
        } else if node.is_container() {
            let base = pascal_case(&node.name, "Component");
            names.insert(node.id.clone(), unique_name(&base, &mut taken));
        }
    }
    names
}

static TEST_ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"testID=\{?\s*"([^"]*)"\s*\}?"#).unwrap());
static OPEN_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[\s(>{])<([A-Za-z][\w.]*)").unwrap());

/// Node ids referenced through `testID` attributes, in order of appearance.
pub fn referenced_ids(source: &str) -> Vec<String> {
    TEST_ID.captures_iter(source).map(|c| c[1].to_string()).collect()
}

/// Element names opened in the source, in order of appearance.
pub fn element_tags(source: &str) -> Vec<String> {
    OPEN_TAG.captures_iter(source).map(|c| c[1].to_string()).collect()
}

/// Check a unit's source for `node` and return the child components it uses.
/// The source must carry `node`'s own `testID`, every `testID` must name a node of `scope`, every element must be a known tag or
/// the component of one of `node`'s container children.
pub fn validate_unit(
    source: &str,
    node: &ComponentNode,
    scope: &ComponentNode,
    names: &BTreeMap<String, String>,
) -> Result<Vec<String>, CodegenError> {
    if source.trim().is_empty() {
        return Err(CodegenError::EmptySource { node: node.id.clone() });
    }
    let ids = referenced_ids(source);
    if !ids.contains(&node.id) {
        return Err(CodegenError::MissingSelfReference { unit: node.id.clone() });
    }
    for id in ids {
        if scope.find(&id).is_none() {
            return Err(CodegenError::UnknownNodeReference {
                unit: node.id.clone(),
                node_id: id,
            });
        }
    }
    let children: Vec<&str> = node
        .children
        .iter()
        .filter(|c| c.is_container())
        .filter_map(|c| names.get(&c.id).map(String::as_str))
        .collect();
    let mut used = HashSet::new();
    for tag in element_tags(source) {
        if Tag::parse(&tag).is_some() {
            continue;
        }
        if !children.contains(&tag.as_str()) {
            return Err(CodegenError::UnknownTag {
                unit: node.id.clone(),
                tag,
            });
        }
        used.insert(tag);
    }
    Ok(children
        .into_iter()
        .filter(|c| used.contains(*c))
        .map(str::to_string)
        .collect())
}

#[derive(Deserialize)]
struct RawUnit {
    node_id: String,
    source: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComponentsAnswer {
    Wrapped { components: Vec<RawUnit> },
    Bare(Vec<RawUnit>),
}

/// Raw `(node_id, source)` pairs of a code answer.
pub fn parse_components_response(text: &str) -> Result<Vec<(String, String)>, String> {
    let raw = match crate::llm::parse_json_response::<ComponentsAnswer>(text)? {
        ComponentsAnswer::Wrapped { components } | ComponentsAnswer::Bare(components) => components,
    };
    Ok(raw.into_iter().map(|u| (u.node_id, u.source)).collect())
}

/// Turn a parsed answer into one validated unit per container of `subtree`, in
/// post-order.
pub fn units_from_answer(
    answer: Vec<(String, String)>,
    subtree: &ComponentNode,
    names: &BTreeMap<String, String>,
) -> Result<Vec<CodeUnit>, CodegenError> {
    let mut by_id: BTreeMap<String, String> = BTreeMap::new();
    for (node_id, source) in answer {
        match subtree.find(&node_id) {
            Some(n) if n.is_container() => {
                if by_id.insert(node_id.clone(), source).is_some() {
                    return Err(CodegenError::DuplicateUnit { node: node_id });
                }
            }
            _ => {
                return Err(CodegenError::UnknownNodeReference {
                    unit: subtree.id.clone(),
                    node_id,
                })
            }
        }
    }
    subtree
        .containers_postorder()
        .into_iter()
        .map(|node| {
            let source = by_id
                .remove(&node.id)
                .ok_or_else(|| CodegenError::MissingUnit { node: node.id.clone() })?;
            let dependencies = validate_unit(&source, node, subtree, names)?;
            Ok(CodeUnit {
                node_id: node.id.clone(),
                component_name: names[&node.id].clone(),
                source,
                dependencies,
            })
        })
        .collect()
}

/// The screenshot region of `bbox`, widened to at least one pixel; the whole
/// screenshot when the region is off-image.
pub(super) fn region_image(screenshot: &RgbaImage, bbox: &BBox) -> RgbaImage {
    let b = BBox::new(bbox.x, bbox.y, bbox.w.max(1), bbox.h.max(1));
    crop_region(screenshot, &b).unwrap_or_else(|_| screenshot.clone())
}

/// Ask the model for the components of one styled division sub-tree.
pub fn generate_component_code(
    subtree: &ComponentNode,
    sub_image: RgbaImage,
    names: &BTreeMap<String, String>,
    client: &LlmClient,
) -> Result<Vec<CodeUnit>, CodegenError> {
    if subtree.is_leaf() {
        return Ok(Vec::new());
    }
    let local: BTreeMap<&str, &str> = subtree
        .containers_postorder()
        .into_iter()
        .map(|n| (n.id.as_str(), names[&n.id].as_str()))
        .collect();
    let tags: Vec<&str> = Tag::ALL.iter().map(|t| t.as_str()).collect();
    let request = PromptTemplate::builtin(TemplateName::Code)
        .render(
            &bindings([
                ("tags", tags.join(", ")),
                ("component_names", serde_json::to_string_pretty(&local).unwrap()),
                ("subtree", serde_json::to_string_pretty(subtree).unwrap()),
            ]),
            vec![Arc::new(sub_image)],
            client.decoding,
        )
        .map_err(|e| CodegenError::llm(TemplateName::Code, &subtree.id, e))?;
    let parse = |text: &str| -> Result<Vec<CodeUnit>, CodegenError> {
        let answer = parse_components_response(text).map_err(|message| CodegenError::ResponseParse {
            stage: TemplateName::Code,
            node: subtree.id.clone(),
            message,
        })?;
        units_from_answer(answer, subtree, names)
    };
    client.ask_parsed(&request, parse).map_err(|e| match e {
        AskError::Llm(e) => CodegenError::llm(TemplateName::Code, &subtree.id, e),
        AskError::Invalid(e) => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{LlmRequest, ScriptedBackend};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn leaf(id: &str, tag: Tag, bbox: BBox) -> ComponentNode {
        ComponentNode::leaf(id, tag, bbox, None)
    }

    /// Search section: a search bar container (icon + input) and a filter button.
    fn search_section() -> ComponentNode {
        let bar = ComponentNode::container(
            "SearchBar",
            vec![
                leaf("ic_search", Tag::Icon, BBox::new(10, 10, 20, 20)),
                leaf("txt_query", Tag::Text, BBox::new(40, 10, 200, 20)),
            ],
        );
        ComponentNode::container(
            "SearchSection",
            vec![bar, leaf("btn_filter", Tag::Icon, BBox::new(260, 10, 20, 20))],
        )
    }

    const BAR: &str = r#"function SearchBar() {
  return (
    <View testID="merged_SearchBar" style={styles["merged_SearchBar"]}>
      <Icon testID="ic_search" style={styles["ic_search"]} />
      <TextInput testID="txt_query" style={styles["txt_query"]} onChangeText={() => {}} />
    </View>
  );
}"#;

    const SECTION: &str = r#"function SearchSection() {
  return (
    <View testID="merged_SearchSection" style={styles["merged_SearchSection"]}>
      <SearchBar />
      <Button testID="btn_filter" style={styles["btn_filter"]} onPress={() => {}} />
    </View>
  );
}"#;

    fn answer(section: &str) -> String {
        serde_json::json!({"components": [
            {"node_id": "merged_SearchBar", "source": BAR},
            {"node_id": "merged_SearchSection", "source": section},
        ]})
        .to_string()
    }

    #[test]
    fn names_are_pascal_unique_and_reserve_page() {
        let mut root = ComponentNode::container("Page", vec![search_section()]);
        root.children.push(ComponentNode::container(
            "page",
            vec![leaf("x", Tag::View, BBox::new(0, 500, 5, 5)), leaf("y", Tag::View, BBox::new(9, 500, 5, 5))],
        ));
        let names = component_names(&root);
        assert_eq!(names["merged_Page"], "Page");
        assert_eq!(names["merged_SearchBar"], "SearchBar");
        assert_eq!(names["merged_page"], "Page_2");
    }

    #[test]
    fn answer_yields_post_ordered_units_with_dependencies() {
        let tree = search_section();
        let names = component_names(&tree);
        let units = units_from_answer(parse_components_response(&answer(SECTION)).unwrap(), &tree, &names).unwrap();
        let ids: Vec<&str> = units.iter().map(|u| u.node_id.as_str()).collect();
        assert_eq!(ids, ["merged_SearchBar", "merged_SearchSection"]);
        assert_eq!(units[1].dependencies, ["SearchBar"]);
        assert!(units[1].source.contains("<Button testID=\"btn_filter\""));
        assert!(units[0].dependencies.is_empty());
    }

    #[test]
    fn unknown_node_reference_is_rejected() {
        let tree = search_section();
        let names = component_names(&tree);
        let bad = SECTION.replace("btn_filter\" style", "zzz\" style");
        let err = units_from_answer(parse_components_response(&answer(&bad)).unwrap(), &tree, &names).unwrap_err();
        assert!(matches!(err, CodegenError::UnknownNodeReference { ref node_id, .. } if node_id == "zzz"));
        let stray = r#"{"components":[{"node_id":"zzz","source":"x"}]}"#;
        assert!(matches!(
            units_from_answer(parse_components_response(stray).unwrap(), &tree, &names),
            Err(CodegenError::UnknownNodeReference { .. })
        ));
    }

    #[test]
    fn elements_outside_the_tag_set_are_rejected() {
        let tree = search_section();
        let names = component_names(&tree);
        let bad = SECTION.replace("<SearchBar />", "<div><SearchBar /></div>");
        assert!(matches!(
            units_from_answer(parse_components_response(&answer(&bad)).unwrap(), &tree, &names),
            Err(CodegenError::UnknownTag { ref tag, .. }) if tag == "div"
        ));
        // a grandchild component may not be used directly
        let bar_in_section = BAR.replace("<Icon testID", "<SearchSection /><Icon testID");
        let err = validate_unit(&bar_in_section, &tree.children[0], &tree, &names).unwrap_err();
        assert!(matches!(err, CodegenError::UnknownTag { .. }));
    }

    #[test]
    fn comparisons_are_not_taken_for_elements() {
        assert_eq!(element_tags("if (i<n && a < b) { return <View/> }"), ["View"]);
        assert_eq!(referenced_ids(r#"<Text testID={"a"} /><View testID="b">"#), ["a", "b"]);
    }

    #[test]
    fn missing_unit_triggers_a_re_ask() {
        let tree = search_section();
        let names = component_names(&tree);
        let calls = AtomicUsize::new(0);
        let client = LlmClient::new(
            Arc::new(ScriptedBackend::new(move |req: &LlmRequest| {
                assert_eq!(req.images.len(), 1);
                Ok(match calls.fetch_add(1, Ordering::SeqCst) {
                    0 => serde_json::json!({"components": [{"node_id": "merged_SearchBar", "source": BAR}]}).to_string(),
                    _ => {
                        assert!(req.rendered_text.contains("no component generated for merged_SearchSection"));
                        answer(SECTION)
                    }
                })
            })),
            1,
        );
        let units = generate_component_code(&tree, RgbaImage::new(4, 4), &names, &client).unwrap();
        assert_eq!(units.len(), 2);
    }
}
