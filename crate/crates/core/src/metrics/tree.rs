use serde_json::Value;

use super::MetricsError;
use crate::grouping::ComponentNode;
use crate::metadata::BBox;

/// A node of a tag-labeled ordered tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricNode {
    pub tag: String,
    pub bbox: Option<BBox>,
    pub children: Vec<MetricNode>,
}

impl MetricNode {
    pub fn new(tag: &str, children: Vec<MetricNode>) -> Self {
        MetricNode {
            tag: tag.to_lowercase(),
            bbox: None,
            children,
        }
    }

    pub fn with_bbox(mut self, bbox: BBox) -> Self {
        self.bbox = Some(bbox);
        self
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(MetricNode::size).sum::<usize>()
    }

    pub fn preorder(&self) -> Vec<&MetricNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn from_component(node: &ComponentNode) -> Self {
        MetricNode {
            tag: node.tag.as_str().to_lowercase(),
            bbox: Some(node.bbox),
            children: node.children.iter().map(MetricNode::from_component).collect(),
        }
    }
}

/// A possibly empty tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricTree {
    pub root: Option<MetricNode>,
}

impl MetricTree {
    pub fn new(root: MetricNode) -> Self {
        MetricTree { root: Some(root) }
    }

    pub fn empty() -> Self {
        MetricTree { root: None }
    }

    pub fn nodes(&self) -> Vec<&MetricNode> {
        self.root.as_ref().map(MetricNode::preorder).unwrap_or_default()
    }

    pub fn internal_nodes(&self) -> Vec<&MetricNode> {
        self.nodes().into_iter().filter(|n| !n.children.is_empty()).collect()
    }

    pub fn node_count(&self) -> usize {
        self.root.as_ref().map_or(0, MetricNode::size)
    }

    pub fn edge_count(&self) -> usize {
        self.node_count().saturating_sub(1)
    }
}

/// Parse a tree file: a component-tree document (`{"root": ...}`), a bare node
/// (`{"tag", "bbox"?, "children"?}`), or `null` / `{"root": null}` for the empty tree.
/// Fields other than tag, bbox and children are ignored.
pub fn parse_metric_tree(bytes: &[u8]) -> Result<MetricTree, MetricsError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| MetricsError::MalformedTree(e.to_string()))?;
    let root = match &value {
        Value::Object(o) if o.contains_key("root") => &o["root"],
        _ => &value,
    };
    match root {
        Value::Null => Ok(MetricTree::empty()),
        node => Ok(MetricTree::new(parse_node(node, "root")?)),
    }
}

fn parse_node(v: &Value, path: &str) -> Result<MetricNode, MetricsError> {
    let bad = |m: &str| MetricsError::MalformedTree(format!("{path}: {m}"));
    let obj = v.as_object().ok_or_else(|| bad("node is not an object"))?;
    let tag = obj
        .get("tag")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing string `tag`"))?;
    let bbox = match obj.get("bbox") {
        None | Some(Value::Null) => None,
        Some(b) => Some(serde_json::from_value::<BBox>(b.clone()).map_err(|e| bad(&e.to_string()))?),
    };
    let children = match obj.get("children") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, c)| parse_node(c, &format!("{path}.children[{i}]")))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(bad("`children` is not a list")),
    };
    Ok(MetricNode {
        tag: tag.to_lowercase(),
        bbox,
        children,
    })
}
