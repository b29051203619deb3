use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

use super::Division;
use crate::codegen::StyleMap;
use crate::metadata::{bbox_union, BBox, DesignDocument, LayerKind};

/// Id prefix of every container node.
pub const CONTAINER_PREFIX: &str = "merged_";
pub const ROOT_ID: &str = "merged_Page";
pub const ROOT_NAME: &str = "Page";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    View,
    ScrollView,
    Text,
    Image,
    Button,
    TextInput,
    List,
    Icon,
}

impl Tag {
    pub const ALL: [Tag; 8] = [
        Tag::View,
        Tag::ScrollView,
        Tag::Text,
        Tag::Image,
        Tag::Button,
        Tag::TextInput,
        Tag::List,
        Tag::Icon,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::View => "View",
            Tag::ScrollView => "ScrollView",
            Tag::Text => "Text",
            Tag::Image => "Image",
            Tag::Button => "Button",
            Tag::TextInput => "TextInput",
            Tag::List => "List",
            Tag::Icon => "Icon",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        Tag::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Grouping-time default for a leaf.
    pub fn for_kind(kind: LayerKind) -> Tag {
        match kind {
            LayerKind::Text => Tag::Text,
            LayerKind::Image => Tag::Image,
            LayerKind::Icon => Tag::Icon,
            LayerKind::Shape | LayerKind::Group | LayerKind::Other => Tag::View,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentNode {
    pub id: String,
    pub name: String,
    pub tag: Tag,
    pub bbox: BBox,
    #[serde(default)]
    pub semantic: Option<String>,
    #[serde(default)]
    pub style: StyleMap,
    #[serde(default)]
    pub children: Vec<ComponentNode>,
}

impl ComponentNode {
    pub fn leaf(id: &str, tag: Tag, bbox: BBox, semantic: Option<String>) -> Self {
        ComponentNode {
            id: id.to_string(),
            name: id.to_string(),
            tag,
            bbox,
            semantic,
            style: StyleMap::new(),
            children: Vec::new(),
        }
    }

    /// A `View` container named `name`; its bbox is the union of the children.
    pub fn container(name: &str, children: Vec<ComponentNode>) -> Self {
        let mut node = ComponentNode {
            id: format!("{CONTAINER_PREFIX}{name}"),
            name: name.to_string(),
            tag: Tag::View,
            bbox: BBox::new(0, 0, 0, 0),
            semantic: None,
            style: StyleMap::new(),
            children,
        };
        node.refresh_bbox();
        node
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_container(&self) -> bool {
        !self.children.is_empty()
    }

    pub fn refresh_bbox(&mut self) {
        let boxes: Vec<BBox> = self.children.iter().map(|c| c.bbox).collect();
        if let Ok(u) = bbox_union(&boxes) {
            self.bbox = u;
        }
    }

    /// Stable sort of children by top-left (y, then x).
    pub fn sort_children(&mut self) {
        self.children.sort_by_key(|c| c.bbox.reading_key());
    }

    pub fn preorder(&self) -> Vec<&ComponentNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// Containers in post-order (children before parents), left to right.
    pub fn containers_postorder(&self) -> Vec<&ComponentNode> {
        fn walk<'a>(n: &'a ComponentNode, out: &mut Vec<&'a ComponentNode>) {
            for c in &n.children {
                walk(c, out);
            }
            if n.is_container() {
                out.push(n);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn leaf_ids(&self) -> Vec<&str> {
        self.preorder()
            .into_iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.id.as_str())
            .collect()
    }

    pub fn find(&self, id: &str) -> Option<&ComponentNode> {
        self.preorder().into_iter().find(|n| n.id == id)
    }

    pub fn find_mut(&mut self, id: &str) -> Option<&mut ComponentNode> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }
}

/// The full hierarchy: a screen-sized root plus the divisions it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentTree {
    pub root: ComponentNode,
    pub divisions: Vec<Division>,
}

impl ComponentTree {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Check every structural invariant against `doc`.
    pub fn check_invariants(&self, doc: &DesignDocument) -> Result<(), String> {
        if self.root.bbox != doc.screen.rect() {
            return Err(format!("root bbox {} is not the screen rect", self.root.bbox));
        }
        let mut ids = HashSet::new();
        for n in self.root.preorder() {
            if !ids.insert(n.id.as_str()) {
                return Err(format!("duplicate node id {:?}", n.id));
            }
        }
        let mut leaf_seen = HashSet::new();
        check_node(&self.root, doc, true, &mut leaf_seen)?;
        for layer in &doc.layers {
            if !leaf_seen.contains(layer.id.as_str()) {
                return Err(format!("layer {:?} has no leaf", layer.id));
            }
        }
        let mut matched = 0;
        for child in &self.root.children {
            let leaves: HashSet<&str> = child.leaf_ids().into_iter().collect();
            let owner = self.divisions.iter().position(|d| {
                d.layer_ids.len() == leaves.len()
                    && d.layer_ids.iter().all(|l| leaves.contains(l.as_str()))
            });
            match owner {
                Some(i) if i == matched => matched += 1,
                Some(i) => {
                    return Err(format!(
                        "root child {:?} holds division {i} out of order",
                        child.id
                    ))
                }
                None if child.is_leaf() && matched == 0 => {}
                None => {
                    return Err(format!(
                        "root child {:?} matches no division",
                        child.id
                    ))
                }
            }
        }
        if matched != self.divisions.len() {
            return Err(format!(
                "{matched} division sub-trees under root but {} divisions",
                self.divisions.len()
            ));
        }
        Ok(())
    }
}

fn check_node<'a>(
    node: &'a ComponentNode,
    doc: &DesignDocument,
    is_root: bool,
    leaf_seen: &mut HashSet<&'a str>,
) -> Result<(), String> {
    if node.is_leaf() {
        let layer = doc
            .layer(&node.id)
            .ok_or_else(|| format!("leaf {:?} is not a layer id", node.id))?;
        if layer.bbox != node.bbox {
            return Err(format!("leaf {:?} bbox differs from its layer", node.id));
        }
        leaf_seen.insert(node.id.as_str());
        return Ok(());
    }
    if !node.id.starts_with(CONTAINER_PREFIX) {
        return Err(format!("container {:?} lacks the {CONTAINER_PREFIX} prefix", node.id));
    }
    if !is_root {
        let union = bbox_union(&node.children.iter().map(|c| c.bbox).collect::<Vec<_>>()).unwrap();
        if union != node.bbox {
            return Err(format!("container {:?} bbox is not the union of its children", node.id));
        }
    }
    let keys: Vec<_> = node.children.iter().map(|c| c.bbox.reading_key()).collect();
    if !is_root && keys.windows(2).any(|w| w[0] > w[1]) {
        return Err(format!("children of {:?} are not in reading order", node.id));
    }
    let containers: Vec<_> = node.children.iter().filter(|c| c.is_container()).collect();
    for (i, a) in containers.iter().enumerate() {
        for b in &containers[i + 1..] {
            if a.bbox.overlaps(&b.bbox) {
                return Err(format!("sibling containers {:?} and {:?} overlap", a.id, b.id));
            }
        }
    }
    for c in &node.children {
        check_node(c, doc, false, leaf_seen)?;
    }
    Ok(())
}
