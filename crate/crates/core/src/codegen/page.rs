use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::units::{component_names, element_tags, generate_component_code, region_image, CodeUnit};
use super::{
    apply_llm_leaf_styles, synthesize_styles, CodegenError, Overflow, StyleMap, StyleMode,
    StyleProp, StyleValue,
};
use crate::grouping::{ComponentNode, ComponentTree, Tag, ROOT_ID, ROOT_NAME};
use crate::llm::LlmClient;
use crate::metadata::{DesignDocument, Mockup};

/// Styles of every node, in tree pre-order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stylesheet(pub Vec<(String, StyleMap)>);

impl Serialize for Stylesheet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (id, style) in &self.0 {
            m.serialize_entry(id, style)?;
        }
        m.end()
    }
}

impl Stylesheet {
    pub fn of(root: &ComponentNode) -> Self {
        Stylesheet(
            root.preorder()
                .into_iter()
                .map(|n| (n.id.clone(), n.style.clone()))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stylesheet serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPage {
    /// Children before parents; the entry unit is last.
    pub units: Vec<CodeUnit>,
    pub entry: String,
    pub stylesheet: Stylesheet,
}

impl GeneratedPage {
    /// The whole page as one self-contained source file.
    pub fn source(&self) -> String {
        let mut out = format!("const styles = {};\n", self.stylesheet.to_json().trim_end());
        for unit in &self.units {
            out.push('\n');
            out.push_str(unit.source.trim_end());
            out.push('\n');
        }
        let _ = writeln!(out, "\nexport default {};", self.entry);
        out
    }

    pub fn unit(&self, node_id: &str) -> Option<&CodeUnit> {
        self.units.iter().find(|u| u.node_id == node_id)
    }

    /// Write `components/<Name>.src`, `page.src`, `styles.map` and `tree.json`.
    pub fn write_to(&self, tree: &ComponentTree, out_dir: &Path) -> Result<(), CodegenError> {
        let components = out_dir.join("components");
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CodegenError::Io { path, source }
        };
        std::fs::create_dir_all(&components).map_err(io(&components))?;
        for unit in &self.units {
            let path = components.join(format!("{}.src", unit.component_name));
            std::fs::write(&path, format!("{}\n", unit.source.trim_end())).map_err(io(&path))?;
        }
        let files = [
            ("page.src", self.source()),
            ("styles.map", self.stylesheet.to_json()),
            ("tree.json", tree.to_json()),
        ];
        for (name, content) in files {
            let path = out_dir.join(name);
            std::fs::write(&path, content).map_err(io(&path))?;
        }
        Ok(())
    }

    /// Read back a page written by [`GeneratedPage::write_to`] for `tree`. Dependencies
    /// are the child components each unit renders.
    pub fn read_from(tree: &ComponentTree, dir: &Path) -> Result<Self, CodegenError> {
        let names = component_names(&tree.root);
        let mut units = Vec::new();
        for node in tree.root.containers_postorder() {
            let name = &names[&node.id];
            let path = dir.join("components").join(format!("{name}.src"));
            let source = match std::fs::read_to_string(&path) {
                Ok(s) => s.trim_end().to_string(),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    return Err(CodegenError::MissingUnit { node: node.id.clone() })
                }
                Err(source) => return Err(CodegenError::Io { path, source }),
            };
            if source.is_empty() {
                return Err(CodegenError::EmptySource { node: node.id.clone() });
            }
            let used: HashSet<String> = element_tags(&source).into_iter().collect();
            let dependencies = node
                .children
                .iter()
                .filter(|c| c.is_container() && used.contains(&names[&c.id]))
                .map(|c| names[&c.id].clone())
                .collect();
            units.push(CodeUnit {
                node_id: node.id.clone(),
                component_name: name.clone(),
                source,
                dependencies,
            });
        }
        Ok(GeneratedPage {
            units,
            entry: ROOT_NAME.to_string(),
            stylesheet: Stylesheet::of(&tree.root),
        })
    }
}

fn element(node: &ComponentNode, doc: &DesignDocument, names: &BTreeMap<String, String>) -> String {
    if node.is_container() {
        return format!("<{} />", names[&node.id]);
    }
    let mut attrs = format!("testID=\"{0}\" style={{styles[\"{0}\"]}}", node.id);
    match node.tag {
        Tag::Button => attrs.push_str(" onPress={() => {}}"),
        Tag::TextInput => attrs.push_str(" onChangeText={() => {}}"),
        _ => {}
    }
    match doc.layer(&node.id).and_then(|l| l.text.as_ref()) {
        Some(text) if node.tag != Tag::TextInput => {
            let content = serde_json::to_string(&text.content).unwrap();
            format!("<{0} {attrs}>{{{content}}}</{0}>", node.tag)
        }
        _ => format!("<{} {attrs} />", node.tag),
    }
}

/// The entry component: background leaves and divisions in root order.
pub fn root_unit(root: &ComponentNode, doc: &DesignDocument) -> CodeUnit {
    let names = component_names(root);
    let tag = match root.style.get(StyleProp::Overflow) {
        Some(StyleValue::Overflow(Overflow::Scroll)) => Tag::ScrollView,
        _ => root.tag,
    };
    let mut source = format!(
        "function {ROOT_NAME}() {{\n  return (\n    <{tag} testID=\"{ROOT_ID}\" style={{styles[\"{ROOT_ID}\"]}}>\n"
    );
    for child in &root.children {
        let _ = writeln!(source, "      {}", element(child, doc, &names));
    }
    let _ = write!(source, "    </{tag}>\n  );\n}}");
    let dependencies = root
        .children
        .iter()
        .filter(|c| c.is_container())
        .map(|c| names[&c.id].clone())
        .collect();
    CodeUnit {
        node_id: ROOT_ID.to_string(),
        component_name: ROOT_NAME.to_string(),
        source,
        dependencies,
    }
}

/// Concatenate per-division units bottom-up, append the entry component and check that
/// every dependency is defined earlier.
pub fn assemble_page(
    per_division: Vec<Vec<CodeUnit>>,
    tree: &ComponentTree,
    doc: &DesignDocument,
) -> Result<GeneratedPage, CodegenError> {
    let order: HashMap<&str, usize> = tree
        .root
        .containers_postorder()
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut units: Vec<CodeUnit> = per_division.into_iter().flatten().collect();
    for u in &units {
        if u.node_id == ROOT_ID || !order.contains_key(u.node_id.as_str()) {
            return Err(CodegenError::UnknownNodeReference {
                unit: u.node_id.clone(),
                node_id: u.node_id.clone(),
            });
        }
    }
    units.sort_by_key(|u| order[u.node_id.as_str()]);
    units.push(root_unit(&tree.root, doc));
    let mut defined = HashSet::new();
    for u in &units {
        if let Some(missing) = u.dependencies.iter().find(|d| !defined.contains(d.as_str())) {
            return Err(CodegenError::DanglingDependency {
                unit: u.component_name.clone(),
                dependency: missing.clone(),
            });
        }
        defined.insert(u.component_name.as_str());
    }
    Ok(GeneratedPage {
        units,
        entry: ROOT_NAME.to_string(),
        stylesheet: Stylesheet::of(&tree.root),
    })
}

/// Style the tree, generate every division's components concurrently and assemble.
/// Returns the styled tree alongside the page.
pub fn generate_page(
    tree: &ComponentTree,
    mockup: &Mockup,
    client: &LlmClient,
    mode: StyleMode,
) -> Result<(ComponentTree, GeneratedPage), CodegenError> {
    let mut styled = synthesize_styles(tree, &mockup.doc);
    if mode == StyleMode::Llm {
        styled = apply_llm_leaf_styles(&styled, &mockup.doc, client)?;
    }
    let names = component_names(&styled.root);
    let subtrees: Vec<&ComponentNode> = styled.root.children.iter().filter(|c| c.is_container()).collect();
    let results = client.map_concurrent(subtrees, |subtree| {
        let image = region_image(&mockup.screenshot, &subtree.bbox);
        generate_component_code(subtree, image, &names, client)
    });
    let per_division = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let page = assemble_page(per_division, &styled, &mockup.doc)?;
    Ok((styled, page))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::ComponentTree;
    use crate::metadata::{BBox, Layer, LayerKind, Screen};

    fn leaf(id: &str, tag: Tag, bbox: BBox) -> ComponentNode {
        ComponentNode::leaf(id, tag, bbox, None)
    }

    fn section(name: &str, y: i64) -> ComponentNode {
        ComponentNode::container(
            name,
            vec![
                leaf(&format!("{name}_a"), Tag::View, BBox::new(0, y, 10, 10)),
                leaf(&format!("{name}_b"), Tag::View, BBox::new(20, y, 10, 10)),
            ],
        )
    }

    fn fixture() -> (ComponentTree, DesignDocument) {
        let mut root = ComponentNode::container(
            "Page",
            vec![
                leaf("bg", Tag::Image, BBox::new(0, 0, 100, 400)),
                section("Header", 0),
                section("Body", 120),
                leaf("caption", Tag::Text, BBox::new(0, 250, 50, 12)),
                section("Footer", 380),
            ],
        );
        root.bbox = BBox::new(0, 0, 100, 400);
        let layers = root
            .leaf_ids()
            .into_iter()
            .map(|id| Layer {
                id: id.to_string(),
                kind: if id == "caption" { LayerKind::Text } else { LayerKind::Shape },
                bbox: root.find(id).unwrap().bbox,
                style: Default::default(),
                text: (id == "caption").then(|| {
                    serde_json::from_str(r##"{"content":"Fresh {fruit}","font_family":"Inter","font_size":12,"weight":400,"color":"#000000"}"##).unwrap()
                }),
            })
            .collect();
        let doc = DesignDocument {
            screen: Screen { width: 100, height: 400 },
            screenshot: "s.png".into(),
            layers,
        };
        (ComponentTree { root, divisions: vec![] }, doc)
    }

    fn unit(node_id: &str, name: &str, deps: &[&str]) -> CodeUnit {
        CodeUnit {
            node_id: node_id.into(),
            component_name: name.into(),
            source: format!("function {name}() {{ return null; }}"),
            dependencies: deps.iter().map(|d| d.to_string()).collect(),
        }
    }

    #[test]
    fn root_renders_divisions_in_order() {
        let (tree, doc) = fixture();
        let per_division = vec![
            vec![unit("merged_Header", "Header", &[])],
            vec![unit("merged_Body", "Body", &[])],
            vec![unit("merged_Footer", "Footer", &[])],
        ];
        let page = assemble_page(per_division, &tree, &doc).unwrap();
        let names: Vec<&str> = page.units.iter().map(|u| u.component_name.as_str()).collect();
        assert_eq!(names, ["Header", "Body", "Footer", "Page"]);
        let root = &page.units[3].source;
        let pos = |s: &str| root.find(s).unwrap();
        assert!(pos("testID=\"bg\"") < pos("<Header />"));
        assert!(pos("<Header />") < pos("<Body />"));
        assert!(pos("<Body />") < pos("testID=\"caption\""));
        assert!(pos("testID=\"caption\"") < pos("<Footer />"));
        assert!(root.contains(r#">{"Fresh {fruit}"}</Text>"#));
        assert_eq!(page.units[3].dependencies, ["Header", "Body", "Footer"]);
        assert_eq!(page.stylesheet.0.len(), tree.root.preorder().len());
        assert!(page.source().ends_with("export default Page;\n"));
    }

    #[test]
    fn missing_dependency_is_dangling() {
        let (tree, doc) = fixture();
        let err = assemble_page(
            vec![vec![unit("merged_Header", "Header", &["Sidebar"])], vec![unit("merged_Body", "Body", &[])]],
            &tree,
            &doc,
        )
        .unwrap_err();
        assert!(matches!(err, CodegenError::DanglingDependency { ref dependency, .. } if dependency == "Sidebar"));
        // the root needs every division component
        let err = assemble_page(vec![vec![unit("merged_Header", "Header", &[])]], &tree, &doc).unwrap_err();
        assert!(matches!(err, CodegenError::DanglingDependency { ref unit, .. } if unit == "Page"));
    }

    #[test]
    fn outputs_land_in_the_declared_layout() {
        let (tree, doc) = fixture();
        let per_division = vec![
            vec![unit("merged_Header", "Header", &[])],
            vec![unit("merged_Body", "Body", &[])],
            vec![unit("merged_Footer", "Footer", &[])],
        ];
        let page = assemble_page(per_division, &tree, &doc).unwrap();
        let dir = tempfile::tempdir().unwrap();
        page.write_to(&tree, dir.path()).unwrap();
        for f in ["components/Header.src", "components/Page.src", "page.src", "styles.map", "tree.json"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let styles: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("styles.map")).unwrap()).unwrap();
        assert!(styles.get("merged_Page").is_some());
        let back = GeneratedPage::read_from(&tree, dir.path()).unwrap();
        assert_eq!(back, page);
        std::fs::remove_file(dir.path().join("components/Body.src")).unwrap();
        let err = GeneratedPage::read_from(&tree, dir.path()).unwrap_err();
        assert!(matches!(err, CodegenError::MissingUnit { ref node } if node == "merged_Body"));
    }
}
