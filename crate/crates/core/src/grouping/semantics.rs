use image::{Rgba, RgbaImage};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;
use std::sync::Arc;

use super::{ask_parsed, Division, GroupingError};
use crate::llm::{bindings, LlmClient, PromptTemplate, TemplateName};
use crate::metadata::{crop_region, BBox, Layer, LayerKind, Mockup};

/// Minimum length of a usable description.
pub const MIN_DESCRIPTION_CHARS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleHint {
    Text,
    Icon,
    Image,
    Control,
    ContainerHint,
    Decoration,
}

impl RoleHint {
    pub fn for_kind(kind: LayerKind) -> RoleHint {
        match kind {
            LayerKind::Text => RoleHint::Text,
            LayerKind::Icon => RoleHint::Icon,
            LayerKind::Image => RoleHint::Image,
            LayerKind::Group => RoleHint::ContainerHint,
            LayerKind::Shape | LayerKind::Other => RoleHint::Decoration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticLayer {
    pub layer_id: String,
    pub description: String,
    #[serde(rename = "role")]
    pub role_hint: RoleHint,
}

#[derive(Deserialize)]
struct RawSemantic {
    layer_id: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    role: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SemanticsAnswer {
    Wrapped { semantics: Vec<RawSemantic> },
    Bare(Vec<RawSemantic>),
}

/// Raw `(layer_id, description, role)` entries of a semantics answer.
pub fn parse_semantics_response(text: &str) -> Result<Vec<(String, String, Option<String>)>, String> {
    let raw = match crate::llm::parse_json_response::<SemanticsAnswer>(text)? {
        SemanticsAnswer::Wrapped { semantics } | SemanticsAnswer::Bare(semantics) => semantics,
    };
    Ok(raw
        .into_iter()
        .map(|r| (r.layer_id, r.description, r.role))
        .collect())
}

fn parse_role(s: &str) -> Option<RoleHint> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_lowercase())).ok()
}

fn layer_payload(layers: &[&Layer]) -> String {
    let items: Vec<_> = layers
        .iter()
        .map(|l| {
            let mut v = json!({"id": l.id, "type": l.kind, "bbox": l.bbox});
            if let Some(t) = &l.text {
                v["text"] = json!(t.content);
            }
            v
        })
        .collect();
    serde_json::to_string_pretty(&items).unwrap()
}

/// Accept answer entries for members that still lack a usable description.
fn absorb(
    entries: Vec<(String, String, Option<String>)>,
    members: &HashMap<&str, &Layer>,
    found: &mut HashMap<String, SemanticLayer>,
) {
    for (id, description, role) in entries {
        let Some(layer) = members.get(id.as_str()) else {
            continue;
        };
        let description = description.trim().to_string();
        if found.contains_key(&id) || description.chars().count() < MIN_DESCRIPTION_CHARS {
            continue;
        }
        let role_hint = role
            .as_deref()
            .and_then(parse_role)
            .unwrap_or_else(|| RoleHint::for_kind(layer.kind));
        found.insert(
            id.clone(),
            SemanticLayer {
                layer_id: id,
                description,
                role_hint,
            },
        );
    }
}

/// Describe every layer of a division. Layers the model skips get one re-ask with
/// their outlines drawn and numbered on the region image; anything still missing is
/// described from its metadata.
pub fn extract_semantics(
    division: &Division,
    mockup: &Mockup,
    client: &LlmClient,
) -> Result<Vec<SemanticLayer>, GroupingError> {
    let layers: Vec<&Layer> = division
        .layer_ids
        .iter()
        .filter_map(|id| mockup.doc.layer(id))
        .collect();
    let members: HashMap<&str, &Layer> = layers.iter().map(|l| (l.id.as_str(), *l)).collect();
    let sub_image = crop_region(&mockup.screenshot, &division.bbox)
        .map_err(|e| GroupingError::Metadata { division: Some(division.id.clone()), source: e })?;
    let template = PromptTemplate::builtin(TemplateName::Semantic);
    let request = template
        .render(
            &bindings([
                ("label", division.label.clone()),
                ("layers", layer_payload(&layers)),
            ]),
            vec![Arc::new(sub_image.clone())],
            client.decoding,
        )
        .map_err(|e| GroupingError::llm(TemplateName::Semantic, Some(&division.id), e))?;

    let entries = ask_parsed(client, &request, Some(&division.id), parse_semantics_response)?;
    let mut found = HashMap::new();
    absorb(entries, &members, &mut found);

    let missing: Vec<&Layer> = layers
        .iter()
        .filter(|l| !found.contains_key(&l.id))
        .copied()
        .collect();
    if !missing.is_empty() {
        let annotated = annotate_outlines(&sub_image, &division.bbox, &missing);
        let legend: Vec<String> = missing
            .iter()
            .enumerate()
            .map(|(i, l)| format!("outline {} = {}", i + 1, l.id))
            .collect();
        let retry = request
            .clone()
            .with_images(vec![Arc::new(annotated)])
            .with_note(&format!(
                "Your previous answer did not describe these layers; they are outlined and numbered in the image ({}). Describe them.",
                legend.join(", ")
            ));
        match client.send(&retry) {
            Ok(resp) => match parse_semantics_response(&resp.text) {
                Ok(entries) => absorb(entries, &members, &mut found),
                Err(e) => log::warn!("division {}: unparseable semantic re-ask: {e}", division.id),
            },
            Err(e) => {
                return Err(GroupingError::llm(TemplateName::Semantic, Some(&division.id), e))
            }
        }
    }

    Ok(layers
        .iter()
        .map(|l| {
            found.remove(&l.id).unwrap_or_else(|| {
                log::warn!("division {}: synthesized description for {}", division.id, l.id);
                SemanticLayer {
                    layer_id: l.id.clone(),
                    description: format!("{} element at {}", l.kind.as_str(), l.bbox),
                    role_hint: RoleHint::for_kind(l.kind),
                }
            })
        })
        .collect())
}

const OUTLINE: Rgba<u8> = Rgba([255, 0, 0, 255]);
const LABEL_INK: Rgba<u8> = Rgba([255, 255, 255, 255]);

// 3x5 digit glyphs, one row per entry, low three bits used.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

fn put(img: &mut RgbaImage, x: i64, y: i64, c: Rgba<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Draw a 2px outline around each layer (coordinates relative to `origin`) and stamp
/// its 1-based number in the top-left corner.
pub fn annotate_outlines(image: &RgbaImage, origin: &BBox, layers: &[&Layer]) -> RgbaImage {
    let mut img = image.clone();
    for (n, layer) in layers.iter().enumerate() {
        let b = layer.bbox;
        let (x0, y0) = (b.x - origin.x, b.y - origin.y);
        let (x1, y1) = (x0 + b.w.max(1) - 1, y0 + b.h.max(1) - 1);
        for t in 0..2 {
            for x in x0..=x1 {
                put(&mut img, x, y0 + t, OUTLINE);
                put(&mut img, x, y1 - t, OUTLINE);
            }
            for y in y0..=y1 {
                put(&mut img, x0 + t, y, OUTLINE);
                put(&mut img, x1 - t, y, OUTLINE);
            }
        }
        let label = (n + 1).to_string();
        let (lx, ly) = (x0 + 2, y0 + 2);
        let width = label.len() as i64 * 4 + 1;
        for y in 0..7 {
            for x in 0..width {
                put(&mut img, lx + x, ly + y, OUTLINE);
            }
        }
        for (k, ch) in label.bytes().enumerate() {
            let glyph = DIGITS[(ch - b'0') as usize];
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..3 {
                    if bits & (0b100 >> col) != 0 {
                        put(&mut img, lx + 1 + k as i64 * 4 + col, ly + 1 + row as i64, LABEL_INK);
                    }
                }
            }
        }
    }
    img
}
