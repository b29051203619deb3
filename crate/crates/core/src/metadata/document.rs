use image::RgbaImage;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use super::{load_image, BBox, MetadataError, StyleAttrs, TextAttrs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Shape,
    Text,
    Image,
    Group,
    Icon,
    Other,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Shape => "shape",
            LayerKind::Text => "text",
            LayerKind::Image => "image",
            LayerKind::Group => "group",
            LayerKind::Icon => "icon",
            LayerKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: LayerKind,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "StyleAttrs::is_empty")]
    pub style: StyleAttrs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<TextAttrs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Screen {
    pub width: u32,
    pub height: u32,
}

impl Screen {
    pub fn rect(&self) -> BBox {
        BBox::new(0, 0, self.width as i64, self.height as i64)
    }
}

/// A parsed design document: screen size, screenshot reference and layers back to front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDocument {
    pub screen: Screen,
    pub screenshot: String,
    pub layers: Vec<Layer>,
}

impl DesignDocument {
    pub fn layer(&self, id: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    fn validate(&self) -> Result<(), MetadataError> {
        let schema = |m: String| Err(MetadataError::SchemaViolation(m));
        if self.screen.width == 0 || self.screen.height == 0 {
            return schema("screen must have positive width and height".into());
        }
        let screen = self.screen.rect();
        let mut seen = HashSet::new();
        for layer in &self.layers {
            if layer.id.is_empty() {
                return schema("layer with empty id".into());
            }
            if !seen.insert(layer.id.as_str()) {
                return schema(format!("duplicate layer id {:?}", layer.id));
            }
            match (layer.kind, &layer.text) {
                (super::LayerKind::Text, None) => {
                    return schema(format!("text layer {:?} has no text.content", layer.id))
                }
                (kind, Some(_)) if kind != super::LayerKind::Text => {
                    return schema(format!(
                        "{} layer {:?} carries text attributes",
                        kind.as_str(),
                        layer.id
                    ))
                }
                _ => {}
            }
            let on_screen = if layer.bbox.is_degenerate() {
                screen.x <= layer.bbox.x
                    && layer.bbox.right() <= screen.right()
                    && screen.y <= layer.bbox.y
                    && layer.bbox.bottom() <= screen.bottom()
            } else {
                layer.bbox.overlaps(&screen)
            };
            if !on_screen {
                return schema(format!(
                    "layer {:?} at {} lies outside the screen",
                    layer.id, layer.bbox
                ));
            }
        }
        Ok(())
    }
}

/// Parse and validate a canonical design document.
pub fn parse_design_document(bytes: &[u8]) -> Result<DesignDocument, MetadataError> {
    let doc: DesignDocument = serde_json::from_slice(bytes).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => MetadataError::SchemaViolation(e.to_string()),
            _ => MetadataError::MalformedDocument(e.to_string()),
        }
    })?;
    doc.validate()?;
    Ok(doc)
}

/// One `(id, bbox, type)` triple of the flat layer list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerEntry {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: LayerKind,
    pub bbox: BBox,
}

pub fn extract_layer_list(doc: &DesignDocument) -> Vec<LayerEntry> {
    doc.layers
        .iter()
        .map(|l| LayerEntry {
            id: l.id.clone(),
            kind: l.kind,
            bbox: l.bbox,
        })
        .collect()
}

/// A design document together with its decoded screenshot.
#[derive(Debug, Clone)]
pub struct Mockup {
    pub doc: DesignDocument,
    pub screenshot: RgbaImage,
}

impl Mockup {
    pub fn new(doc: DesignDocument, screenshot: RgbaImage) -> Result<Self, MetadataError> {
        let expected = (doc.screen.width, doc.screen.height);
        if screenshot.dimensions() != expected {
            return Err(MetadataError::DimensionMismatch {
                expected,
                actual: screenshot.dimensions(),
            });
        }
        Ok(Mockup { doc, screenshot })
    }

    /// Read a document file; the screenshot path is resolved against the document's directory.
    pub fn load(path: &Path) -> Result<Self, MetadataError> {
        let bytes = std::fs::read(path).map_err(|source| MetadataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let doc = parse_design_document(&bytes)?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let screenshot = load_image(&dir.join(&doc.screenshot))?;
        Mockup::new(doc, screenshot)
    }
}
