use serde_json::{json, Value};

use super::{CodegenError, Overflow, StyleMap, StyleProp, StyleValue};
use crate::grouping::{ComponentNode, ComponentTree};
use crate::llm::{bindings, AskError, LlmClient, LlmError, PromptTemplate, TemplateName};
use crate::metadata::{BBox, DesignDocument, Layer, LayerKind};

/// How leaf styles are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StyleMode {
    /// Derived from design metadata only.
    #[default]
    Metadata,
    /// Proposed per leaf by the model, geometry back-filled from metadata.
    Llm,
}

/// Width of `w` in hundredths of a percent of `parent_w`, rounded half-up.
fn width_hundredths(w: i64, parent_w: i64) -> i64 {
    if parent_w <= 0 {
        return 0;
    }
    (20_000 * w + parent_w) / (2 * parent_w)
}

/// Offsets, percent width and px height of `bbox` inside `parent`. The box is clamped
/// horizontally and to the parent's top edge; it may extend below the parent.
fn placement(bbox: &BBox, parent: &BBox) -> StyleMap {
    let left = bbox.x.clamp(parent.x, parent.right());
    let right = bbox.right().clamp(parent.x, parent.right());
    let top = bbox.y.max(parent.y);
    let bottom = bbox.bottom().max(top);
    let mut style = StyleMap::new();
    style.set(StyleProp::Left, StyleValue::Px(left - parent.x));
    style.set(StyleProp::Top, StyleValue::Px(top - parent.y));
    style.set(
        StyleProp::Width,
        StyleValue::Percent(width_hundredths(right - left, parent.w)),
    );
    style.set(StyleProp::Height, StyleValue::Px(bottom - top));
    style
}

/// Deterministic style of one layer placed inside `parent_bbox`.
pub fn derive_leaf_style(layer: &Layer, parent_bbox: &BBox) -> StyleMap {
    let mut style = placement(&layer.bbox, parent_bbox);
    if let Some(text) = &layer.text {
        style.set(StyleProp::FontSize, StyleValue::Px(text.font_size.0));
        style.set(StyleProp::FontWeight, StyleValue::Weight(text.weight));
        let line_height = text.line_height.map_or(layer.bbox.h, |p| p.0);
        style.set(StyleProp::LineHeight, StyleValue::Px(line_height));
        style.set(StyleProp::Color, StyleValue::Color(text.color));
    }
    let s = &layer.style;
    if let Some(c) = s.fill {
        style.set(StyleProp::BackgroundColor, StyleValue::Color(c));
    }
    if let Some(w) = s.border_width {
        style.set(StyleProp::BorderWidth, StyleValue::Px(w.0));
    }
    if let Some(c) = s.border_color {
        style.set(StyleProp::BorderColor, StyleValue::Color(c));
    }
    if let Some(r) = s.corner_radius {
        style.set(StyleProp::CornerRadius, StyleValue::Px(r.0));
    }
    if let Some(p) = s.padding {
        style.set(StyleProp::Padding, StyleValue::Px(p.0));
    }
    if let Some(sh) = s.shadow {
        style.set(StyleProp::Shadow, StyleValue::Shadow(sh));
    }
    if let Some(o) = s.opacity {
        style.set(StyleProp::Opacity, StyleValue::Opacity(o.get()));
    }
    style
}

/// Height a container declares in the design: the tallest group layer among its
/// direct leaves. The root declares the screen height.
fn declared_height(node: &ComponentNode, doc: &DesignDocument) -> Option<i64> {
    node.children
        .iter()
        .filter(|c| c.is_leaf())
        .filter_map(|c| doc.layer(&c.id))
        .filter(|l| l.kind == LayerKind::Group)
        .map(|l| l.bbox.h)
        .max()
}

/// Style of a container from its (already aggregated) bbox and children.
pub fn aggregate_container_style(
    node: &ComponentNode,
    parent_bbox: &BBox,
    declared_height: Option<i64>,
) -> StyleMap {
    let mut style = placement(&node.bbox, parent_bbox);
    let top = node.children.iter().map(|c| c.bbox.y).min().unwrap_or(node.bbox.y);
    let bottom = node.children.iter().map(|c| c.bbox.bottom()).max().unwrap_or(node.bbox.bottom());
    if declared_height.is_some_and(|h| bottom - top > h) {
        style.set(StyleProp::Overflow, StyleValue::Overflow(Overflow::Scroll));
    }
    style
}

fn style_node(node: &mut ComponentNode, parent: &BBox, doc: &DesignDocument) {
    let bbox = node.bbox;
    for c in &mut node.children {
        style_node(c, &bbox, doc);
    }
    node.style = match doc.layer(&node.id).filter(|_| node.is_leaf()) {
        Some(layer) => derive_leaf_style(layer, parent),
        None => aggregate_container_style(node, parent, declared_height(node, doc)),
    };
}

/// Fill every node's style bottom-up from design metadata. Pure and idempotent.
pub fn synthesize_styles(tree: &ComponentTree, doc: &DesignDocument) -> ComponentTree {
    let mut out = tree.clone();
    let screen = doc.screen.rect();
    let root = &mut out.root;
    for c in &mut root.children {
        style_node(c, &screen, doc);
    }
    let mut style = placement(&screen, &screen);
    let content = root.children.iter().map(|c| c.bbox.bottom()).max().unwrap_or(0);
    if content > screen.bottom() {
        style.set(StyleProp::Overflow, StyleValue::Overflow(Overflow::Scroll));
    }
    root.style = style;
    out
}

/// Parse a model style proposal. Unknown properties and invalid values are dropped
/// with a warning; numbers are read as px for length properties.
pub fn parse_style_response(text: &str) -> Result<StyleMap, String> {
    let obj: serde_json::Map<String, Value> = crate::llm::parse_json_response(text)?;
    let mut map = StyleMap::new();
    for (k, v) in obj {
        let Some(prop) = StyleProp::parse_name(&k) else {
            log::warn!("dropping unknown style property {k:?}");
            continue;
        };
        let raw = match &v {
            Value::String(s) => s.clone(),
            Value::Number(n) if prop.is_length() => format!("{n}px"),
            Value::Number(n) if prop == StyleProp::Width => format!("{n}%"),
            Value::Number(n) => n.to_string(),
            _ => {
                log::warn!("dropping style property {k:?} with non-scalar value");
                continue;
            }
        };
        match prop.parse_value(&raw) {
            Ok(value) => map.set(prop, value),
            Err(e) => log::warn!("dropping style property: {e}"),
        }
    }
    Ok(map)
}

/// Ask the model for a leaf's style; geometry missing from the answer is taken from
/// [`derive_leaf_style`]. An empty answer falls back to the derived style entirely.
pub fn predict_leaf_style_llm(
    layer: &Layer,
    parent_bbox: &BBox,
    client: &LlmClient,
) -> Result<StyleMap, CodegenError> {
    let derived = derive_leaf_style(layer, parent_bbox);
    let request = PromptTemplate::builtin(TemplateName::Style)
        .render(
            &bindings([
                ("layer", serde_json::to_string_pretty(layer).unwrap()),
                ("parent_bbox", json!(parent_bbox).to_string()),
            ]),
            vec![],
            client.decoding,
        )
        .map_err(|e| CodegenError::llm(TemplateName::Style, &layer.id, e))?;
    let mut proposed = match client.ask_parsed(&request, parse_style_response) {
        Ok(map) => map,
        Err(AskError::Llm(LlmError::EmptyResponse { .. })) => return Ok(derived),
        Err(AskError::Llm(e)) => return Err(CodegenError::llm(TemplateName::Style, &layer.id, e)),
        Err(AskError::Invalid(message)) => {
            return Err(CodegenError::ResponseParse {
                stage: TemplateName::Style,
                node: layer.id.clone(),
                message,
            })
        }
    };
    for prop in [StyleProp::Left, StyleProp::Top, StyleProp::Width, StyleProp::Height] {
        if !proposed.contains(prop) {
            proposed.set(prop, *derived.get(prop).unwrap());
        }
    }
    Ok(proposed)
}

/// Replace every leaf style with a model proposal, one request per leaf.
pub fn apply_llm_leaf_styles(
    tree: &ComponentTree,
    doc: &DesignDocument,
    client: &LlmClient,
) -> Result<ComponentTree, CodegenError> {
    let mut jobs = Vec::new();
    collect_leaves(&tree.root, &tree.root.bbox, &mut jobs);
    let jobs: Vec<(String, BBox)> = jobs
        .into_iter()
        .filter(|(id, _)| doc.layer(id).is_some())
        .collect();
    let styles = client.map_concurrent(jobs, |(id, parent)| {
        let layer = doc.layer(&id).expect("filtered above");
        predict_leaf_style_llm(layer, &parent, client).map(|s| (id, s))
    });
    let mut out = tree.clone();
    for result in styles {
        let (id, style) = result?;
        out.root.find_mut(&id).expect("leaf exists").style = style;
    }
    Ok(out)
}

fn collect_leaves(node: &ComponentNode, parent: &BBox, out: &mut Vec<(String, BBox)>) {
    if node.is_leaf() {
        out.push((node.id.clone(), *parent));
    }
    for c in &node.children {
        collect_leaves(c, &node.bbox, out);
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::Tag;
    use crate::llm::ScriptedBackend;
    use crate::metadata::{Px, Rgba, Screen, StyleAttrs, TextAttrs};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn layer(id: &str, kind: LayerKind, bbox: BBox) -> Layer {
        Layer {
            id: id.into(),
            kind,
            bbox,
            style: StyleAttrs::default(),
            text: None,
        }
    }

    fn text_layer(bbox: BBox, line_height: Option<i64>) -> Layer {
        Layer {
            text: Some(TextAttrs {
                content: "Hi".into(),
                font_family: "Inter".into(),
                font_size: Px(16),
                weight: 600,
                color: Rgba::new(0, 0, 0, 255),
                line_height: line_height.map(Px),
            }),
            ..layer("t", LayerKind::Text, bbox)
        }
    }

    fn show(s: &StyleMap) -> String {
        serde_json::to_string(s).unwrap()
    }

    #[test]
    fn leaf_offsets_and_percent_width() {
        let s = derive_leaf_style(&layer("a", LayerKind::Shape, BBox::new(10, 20, 50, 30)), &BBox::new(0, 0, 100, 200));
        assert_eq!(show(&s), r#"{"left":"10px","top":"20px","width":"50.00%","height":"30px"}"#);
        let full = derive_leaf_style(&layer("a", LayerKind::Shape, BBox::new(5, 5, 90, 40)), &BBox::new(5, 5, 90, 40));
        assert_eq!(show(&full), r#"{"left":"0px","top":"0px","width":"100.00%","height":"40px"}"#);
        let third = derive_leaf_style(&layer("a", LayerKind::Shape, BBox::new(0, 0, 1, 1)), &BBox::new(0, 0, 3, 3));
        assert_eq!(third.percent(), Some(3333));
    }

    #[test]
    fn text_line_height_defaults_to_bbox_height() {
        let s = derive_leaf_style(&text_layer(BBox::new(0, 0, 100, 22), None), &BBox::new(0, 0, 100, 100));
        assert_eq!(s.px(StyleProp::LineHeight), Some(22));
        assert_eq!(s.px(StyleProp::FontSize), Some(16));
        assert_eq!(s.get(StyleProp::FontWeight), Some(&StyleValue::Weight(600)));
        let s = derive_leaf_style(&text_layer(BBox::new(0, 0, 100, 22), Some(20)), &BBox::new(0, 0, 100, 100));
        assert_eq!(s.px(StyleProp::LineHeight), Some(20));
    }

    #[test]
    fn style_attributes_carry_through() {
        let mut l = layer("a", LayerKind::Shape, BBox::new(0, 0, 10, 10));
        l.style = serde_json::from_str(
            r##"{"fill":"#FF0000","corner_radius":8,"shadow":{"x":0,"y":2,"blur":4,"color":"#00000040"},"opacity":0.5}"##,
        )
        .unwrap();
        let s = derive_leaf_style(&l, &BBox::new(0, 0, 10, 10));
        assert_eq!(s.get(StyleProp::BackgroundColor).unwrap().to_string(), "#FF0000FF");
        assert_eq!(s.px(StyleProp::CornerRadius), Some(8));
        assert_eq!(s.get(StyleProp::Shadow).unwrap().to_string(), "0px 2px 4px #00000040");
        assert_eq!(s.get(StyleProp::Opacity), Some(&StyleValue::Opacity(0.5)));
    }

    #[test]
    fn overflowing_leaf_is_clamped_horizontally_only() {
        let s = derive_leaf_style(&layer("a", LayerKind::Shape, BBox::new(-10, 150, 120, 100)), &BBox::new(0, 0, 100, 200));
        assert_eq!(show(&s), r#"{"left":"0px","top":"150px","width":"100.00%","height":"100px"}"#);
    }

    fn container(children: Vec<ComponentNode>) -> ComponentNode {
        ComponentNode::container("Box", children)
    }

    fn leaf(id: &str, bbox: BBox) -> ComponentNode {
        ComponentNode::leaf(id, Tag::View, bbox, None)
    }

    #[test]
    fn container_height_is_the_union() {
        let c = container(vec![leaf("a", BBox::new(0, 0, 50, 50)), leaf("b", BBox::new(0, 60, 50, 50))]);
        let s = aggregate_container_style(&c, &BBox::new(0, 0, 100, 400), None);
        assert_eq!(s.px(StyleProp::Height), Some(110));
        assert_eq!(s.percent(), Some(5000));
        assert!(!s.contains(StyleProp::Overflow));
    }

    #[test]
    fn content_taller_than_declared_height_scrolls() {
        let c = container(vec![leaf("a", BBox::new(0, 0, 50, 200)), leaf("b", BBox::new(0, 200, 50, 300))]);
        let s = aggregate_container_style(&c, &BBox::new(0, 0, 100, 1000), Some(200));
        assert_eq!(s.get(StyleProp::Overflow), Some(&StyleValue::Overflow(Overflow::Scroll)));
    }

    fn doc(layers: Vec<Layer>) -> DesignDocument {
        DesignDocument {
            screen: Screen { width: 200, height: 400 },
            screenshot: "s.png".into(),
            layers,
        }
    }

    fn tree_of(root_children: Vec<ComponentNode>) -> ComponentTree {
        let mut root = ComponentNode::container("Page", root_children);
        root.bbox = BBox::new(0, 0, 200, 400);
        ComponentTree { root, divisions: vec![] }
    }

    #[test]
    fn root_and_single_leaf_get_two_styles() {
        let d = doc(vec![layer("a", LayerKind::Shape, BBox::new(20, 40, 100, 50))]);
        let styled = synthesize_styles(&tree_of(vec![leaf("a", BBox::new(20, 40, 100, 50))]), &d);
        let styles: Vec<_> = styled.root.preorder().iter().map(|n| n.style.clone()).collect();
        assert_eq!(styles.len(), 2);
        assert_eq!(show(&styles[0]), r#"{"left":"0px","top":"0px","width":"100.00%","height":"400px"}"#);
        assert_eq!(show(&styles[1]), r#"{"left":"20px","top":"40px","width":"50.00%","height":"50px"}"#);
        assert_eq!(synthesize_styles(&styled, &d), styled);
    }

    #[test]
    fn root_scrolls_when_content_exceeds_the_screen() {
        let d = doc(vec![layer("a", LayerKind::Shape, BBox::new(0, 300, 200, 300))]);
        let styled = synthesize_styles(&tree_of(vec![leaf("a", BBox::new(0, 300, 200, 300))]), &d);
        assert!(styled.root.style.contains(StyleProp::Overflow));
    }

    #[test]
    fn group_layer_declares_container_height() {
        let d = doc(vec![
            layer("frame", LayerKind::Group, BBox::new(0, 0, 100, 100)),
            layer("a", LayerKind::Shape, BBox::new(0, 50, 100, 150)),
        ]);
        let c = container(vec![leaf("frame", BBox::new(0, 0, 100, 100)), leaf("a", BBox::new(0, 50, 100, 150))]);
        let styled = synthesize_styles(&tree_of(vec![c]), &d);
        let box_style = &styled.root.children[0].style;
        assert_eq!(box_style.get(StyleProp::Overflow), Some(&StyleValue::Overflow(Overflow::Scroll)));
    }

    fn client(answer: &'static str) -> LlmClient {
        LlmClient::new(Arc::new(ScriptedBackend::new(move |_: &crate::llm::LlmRequest| Ok(answer.to_string()))), 1)
    }

    #[test]
    fn model_style_is_filtered_and_back_filled() {
        let l = layer("a", LayerKind::Shape, BBox::new(10, 20, 50, 30));
        let parent = BBox::new(0, 0, 100, 200);
        let s = predict_leaf_style_llm(
            &l,
            &parent,
            &client(r##"{"background_color":"#FFFFFF","corner_radius":12,"blend-mode":"multiply"}"##),
        )
        .unwrap();
        assert_eq!(
            show(&s),
            r##"{"left":"10px","top":"20px","width":"50.00%","height":"30px","background_color":"#FFFFFFFF","corner_radius":"12px"}"##
        );
        assert_eq!(predict_leaf_style_llm(&l, &parent, &client("")).unwrap(), derive_leaf_style(&l, &parent));
    }

    proptest! {
        #[test]
        fn geometry_round_trips_within_a_pixel(
            (px, py, pw, ph) in (-500i64..500, -500i64..500, 1i64..2000, 1i64..2000),
            fx in 0.0f64..1.0, fy in 0.0f64..1.0, fw in 0.0f64..1.0, fh in 0.0f64..1.0,
        ) {
            let x = px + (fx * pw as f64) as i64;
            let w = ((px + pw - x) as f64 * fw) as i64;
            let y = py + (fy * ph as f64) as i64;
            let h = ((py + ph - y) as f64 * fh) as i64;
            let parent = BBox::new(px, py, pw, ph);
            let s = derive_leaf_style(&layer("a", LayerKind::Shape, BBox::new(x, y, w, h)), &parent);
            let rx = px + s.px(StyleProp::Left).unwrap();
            let ry = py + s.px(StyleProp::Top).unwrap();
            let rw = (s.percent().unwrap() as f64 * pw as f64 / 10_000.0).round() as i64;
            prop_assert_eq!((rx, ry, s.px(StyleProp::Height).unwrap()), (x, y, h));
            prop_assert!((rw - w).abs() <= 1);
        }
    }
}
