//! Builds the bundled `fruit_salad` fixture: a 360x640 shop screen, render snapshots,
//! a ground-truth tree and transcripts recorded from a scripted backend.
//!
//! cargo run -p designcoder-core --example make_fixture [-- <out dir>]

use image::{Rgba, RgbaImage};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use designcoder::codegen::{generate_page, StyleMode};
use designcoder::grouping::{run_grouping_chain, ComponentNode, ComponentTree};
use designcoder::llm::{
    LlmBackend, LlmClient, LlmError, LlmRequest, RecordingBackend, ScriptedBackend, TemplateName, TranscriptStore,
};
use designcoder::metadata::{encode_png, parse_design_document, BBox, DesignDocument, LayerKind, Mockup};
use designcoder::refine::{perturb, refine_page, render_tree, Perturbation, RepairOutcome};

const WIDTH: i64 = 360;
const HEIGHT: i64 = 640;

fn rect(x: i64, y: i64, w: i64, h: i64) -> Value {
    json!([x, y, w, h])
}

fn text(id: &str, bbox: Value, content: &str, size: i64, weight: u32, color: &str) -> Value {
    json!({"id": id, "type": "text", "bbox": bbox,
           "text": {"content": content, "font_family": "Inter", "font_size": size, "weight": weight, "color": color}})
}

fn document() -> DesignDocument {
    let mut layers = vec![
        json!({"id": "bg", "type": "shape", "bbox": rect(0, 0, WIDTH, HEIGHT), "style": {"fill": "#FFF8EE"}}),
        json!({"id": "header_bg", "type": "shape", "bbox": rect(0, 0, WIDTH, 56), "style": {"fill": "#2E7D32"}}),
        text("header_title", rect(16, 16, 200, 24), "Fruit Salad", 20, 700, "#FFFFFF"),
        json!({"id": "header_cart", "type": "icon", "bbox": rect(312, 14, 28, 28), "style": {"fill": "#FFFFFF"}}),
        json!({"id": "search_box", "type": "shape", "bbox": rect(16, 72, 328, 40),
               "style": {"fill": "#FFFFFF", "border_color": "#C8C8C8", "border_width": 1, "corner_radius": 20}}),
        json!({"id": "search_icon", "type": "icon", "bbox": rect(28, 82, 20, 20), "style": {"fill": "#757575"}}),
        text("search_hint", rect(56, 82, 200, 20), "Search fruits", 14, 400, "#9E9E9E"),
    ];
    let cards = [("Strawberries", "$3.99 / lb", "#E53935"), ("Kiwi", "$0.79 each", "#7CB342"), ("Mango", "$1.49 each", "#FFB300")];
    for (i, (name, price, tint)) in cards.iter().enumerate() {
        let y = 128 + 120 * i as i64;
        layers.push(json!({"id": format!("card{i}_bg"), "type": "shape", "bbox": rect(16, y, 328, 104),
                           "style": {"fill": "#FFFFFF", "corner_radius": 12,
                                     "shadow": {"x": 0, "y": 2, "blur": 6, "color": "#00000022"}}}));
        layers.push(json!({"id": format!("card{i}_img"), "type": "image", "bbox": rect(28, y + 12, 80, 80),
                           "style": {"fill": tint, "corner_radius": 8}}));
        layers.push(text(&format!("card{i}_name"), rect(120, y + 16, 200, 22), name, 17, 600, "#212121"));
        layers.push(text(&format!("card{i}_price"), rect(120, y + 48, 120, 20), price, 14, 400, "#616161"));
    }
    layers.push(json!({"id": "tab_bg", "type": "shape", "bbox": rect(0, 584, WIDTH, 56), "style": {"fill": "#FFFFFF"}}));
    for (i, id) in ["tab_home", "tab_search", "tab_profile"].iter().enumerate() {
        let x = 48 + 120 * i as i64;
        layers.push(json!({"id": id, "type": "icon", "bbox": rect(x, 596, 32, 32), "style": {"fill": "#2E7D32"}}));
    }
    let doc = json!({"screen": {"width": WIDTH, "height": HEIGHT}, "screenshot": "screen.png", "layers": layers});
    parse_design_document(doc.to_string().as_bytes()).expect("fixture document is valid")
}

fn fill(img: &mut RgbaImage, b: &BBox, c: [u8; 4]) {
    for y in b.y.max(0)..b.bottom().min(img.height() as i64) {
        for x in b.x.max(0)..b.right().min(img.width() as i64) {
            let px = img.get_pixel_mut(x as u32, y as u32);
            let a = c[3] as u32;
            for k in 0..3 {
                px.0[k] = ((c[k] as u32 * a + px.0[k] as u32 * (255 - a)) / 255) as u8;
            }
        }
    }
}

/// Flat paint: fills, striped images, block glyphs for text.
fn paint(doc: &DesignDocument) -> RgbaImage {
    let mut img = RgbaImage::from_pixel(WIDTH as u32, HEIGHT as u32, Rgba([255, 255, 255, 255]));
    for layer in &doc.layers {
        let b = layer.bbox;
        if let Some(c) = layer.style.fill {
            fill(&mut img, &b, c.to_array());
        }
        match layer.kind {
            LayerKind::Image => {
                for k in (0..b.h).step_by(8) {
                    fill(&mut img, &BBox::new(b.x, b.y + k, b.w, 3), [255, 255, 255, 60]);
                }
            }
            LayerKind::Icon => fill(&mut img, &BBox::new(b.x + b.w / 4, b.y + b.h / 4, b.w / 2, b.h / 2), [0, 0, 0, 90]),
            LayerKind::Text => {
                let t = layer.text.as_ref().unwrap();
                let advance = (t.font_size.0 * 11 / 20).max(1);
                for (i, ch) in t.content.chars().enumerate() {
                    if !ch.is_whitespace() {
                        let x = b.x + advance * i as i64;
                        fill(&mut img, &BBox::new(x, b.y + 3, advance - 1, b.h - 6), t.color.to_array());
                    }
                }
            }
            _ => {}
        }
    }
    img
}

/// The `index`-th fenced block of a prompt.
fn fenced<'a>(text: &'a str, index: usize) -> &'a str {
    let body = text.split("```").nth(2 * index + 1).expect("fenced block");
    body.strip_prefix("json").unwrap_or(body).trim()
}

fn quoted_label(text: &str) -> &str {
    text.split("region \"").nth(1).and_then(|s| s.split('"').next()).expect("region label")
}

fn divide_answer(doc: &DesignDocument) -> String {
    let regions = [("Header", "header_"), ("Search", "search_"), ("Products", "card"), ("TabBar", "tab_")];
    let divisions: Vec<Value> = regions
        .iter()
        .map(|(label, prefix)| {
            let ids: Vec<&str> = doc.layers.iter().filter(|l| l.id.starts_with(prefix)).map(|l| l.id.as_str()).collect();
            json!({"label": label, "layer_ids": ids})
        })
        .collect();
    json!({ "divisions": divisions }).to_string()
}

fn semantic_answer(prompt: &str) -> String {
    let layers: Vec<Value> = serde_json::from_str(fenced(prompt, 0)).expect("layer payload");
    let semantics: Vec<Value> = layers
        .iter()
        .map(|l| {
            let id = l["id"].as_str().unwrap();
            let (description, role) = match l["type"].as_str().unwrap() {
                "text" => (format!("Label reading \"{}\".", l["text"].as_str().unwrap_or("")), "text"),
                "icon" => (format!("Tappable icon {id} that navigates to its section."), "icon"),
                "image" => (format!("Product photo shown by {id}."), "image"),
                _ => (format!("Background shape {id} framing its neighbours."), "decoration"),
            };
            json!({"layer_id": id, "description": description, "role": role})
        })
        .collect();
    json!({ "semantics": semantics }).to_string()
}

fn leaves(ids: &[&str]) -> Vec<Value> {
    ids.iter().map(|id| json!({ "layer_id": id })).collect()
}

fn group_answer(prompt: &str) -> String {
    let label = quoted_label(prompt);
    let children: Vec<Value> = match label {
        "Header" => leaves(&["header_bg", "header_title", "header_cart"]),
        "Search" => vec![json!({"name": "SearchBar", "children": leaves(&["search_box", "search_icon", "search_hint"])})],
        "Products" => (0..3)
            .map(|i| {
                let ids: Vec<String> = ["bg", "img", "name", "price"].iter().map(|p| format!("card{i}_{p}")).collect();
                let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
                json!({"name": "ProductCard", "children": leaves(&refs)})
            })
            .collect(),
        "TabBar" => {
            let mut c = leaves(&["tab_bg"]);
            c.push(json!({"name": "Tabs", "children": leaves(&["tab_home", "tab_search", "tab_profile"])}));
            c
        }
        other => panic!("unexpected region {other}"),
    };
    json!({"name": label, "children": children}).to_string()
}

fn leaf_element(node: &ComponentNode, doc: &DesignDocument) -> String {
    let attrs = format!("testID=\"{0}\" style={{styles[\"{0}\"]}}", node.id);
    match doc.layer(&node.id).and_then(|l| l.text.as_ref()) {
        Some(t) => format!("<{0} {attrs}>{1}</{0}>", node.tag, t.content),
        None => format!("<{} {attrs} />", node.tag),
    }
}

fn code_answer(prompt: &str, doc: &DesignDocument) -> String {
    let names: BTreeMap<String, String> = serde_json::from_str(fenced(prompt, 0)).expect("names");
    let subtree: ComponentNode = serde_json::from_str(fenced(prompt, 1)).expect("subtree");
    let components: Vec<Value> = subtree
        .containers_postorder()
        .into_iter()
        .map(|n| {
            let mut body = String::new();
            for c in &n.children {
                let el = if c.is_container() { format!("<{} />", names[&c.id]) } else { leaf_element(c, doc) };
                body.push_str(&format!("      {el}\n"));
            }
            let source = format!(
                "function {name}() {{\n  return (\n    <{tag} testID=\"{id}\" style={{styles[\"{id}\"]}}>\n{body}    </{tag}>\n  );\n}}",
                name = names[&n.id],
                tag = n.tag,
                id = n.id
            );
            json!({"node_id": n.id, "source": source})
        })
        .collect();
    json!({ "components": components }).to_string()
}

/// Flags a component when its crops differ outside its child containers.
fn analysis_answer(req: &LlmRequest, tree: &ComponentTree) -> String {
    let label = req.rendered_text.split("Component: ").nth(1).and_then(|s| s.lines().next()).unwrap();
    let id = label.rsplit('(').next().unwrap().trim_end_matches(')');
    let node = tree.root.find(id).expect("analysed node is in the tree");
    let (a, b) = (&req.images[0].image, &req.images[1].image);
    let own_area_differs = a.dimensions() != b.dimensions()
        || a.enumerate_pixels().any(|(x, y, p)| {
            let at = BBox::new(node.bbox.x + x as i64, node.bbox.y + y as i64, 1, 1);
            let in_child = node.children.iter().any(|c| c.is_container() && c.bbox.contains(&at));
            !in_child && p != b.get_pixel(x, y)
        });
    if own_area_differs {
        json!({"verdict": "needs_repair",
               "suggestion": "The component is tinted; restore its original background and content colors."})
        .to_string()
    } else {
        json!({"verdict": "ok", "suggestion": ""}).to_string()
    }
}

fn repair_answer(prompt: &str) -> String {
    let code = prompt.split("```").nth(1).unwrap().trim();
    let id = code.split("testID=\"").nth(1).and_then(|s| s.split('"').next()).unwrap();
    let own = format!("style={{styles[\"{id}\"]}}");
    let fixed = code.replacen(&own, &format!("style={{[styles[\"{id}\"], {{ opacity: 1 }}]}}"), 1);
    json!({ "source": fixed }).to_string()
}

fn scripted(doc: DesignDocument, tree: Arc<Mutex<Option<ComponentTree>>>) -> Arc<dyn LlmBackend> {
    Arc::new(ScriptedBackend::new(move |req: &LlmRequest| -> Result<String, LlmError> {
        Ok(match req.template {
            TemplateName::Divide => divide_answer(&doc),
            TemplateName::Semantic => semantic_answer(&req.rendered_text),
            TemplateName::Group => group_answer(&req.rendered_text),
            TemplateName::Code => code_answer(&req.rendered_text, &doc),
            TemplateName::Analysis => analysis_answer(req, tree.lock().unwrap().as_ref().expect("styled tree")),
            TemplateName::Repair => repair_answer(&req.rendered_text),
            TemplateName::Style => panic!("the fixture uses metadata styles"),
        })
    }))
}

fn recording(backend: &Arc<dyn LlmBackend>) -> (LlmClient, Arc<TranscriptStore>) {
    let store = Arc::new(TranscriptStore::new());
    let client = LlmClient::new(Arc::new(RecordingBackend::new(backend.clone(), store.clone())), 4);
    (client, store)
}

/// A ground truth that nests the card texts and flattens the search bar.
fn truth_tree(styled: &ComponentTree) -> Value {
    fn node(n: &ComponentNode) -> Value {
        let children: Vec<Value> = if n.id.starts_with("merged_ProductCard") {
            let (texts, rest): (Vec<_>, Vec<_>) = n.children.iter().partition(|c| c.tag.as_str() == "Text");
            let union = texts.iter().skip(1).fold(texts[0].bbox, |acc, c| acc.union(&c.bbox));
            let mut out: Vec<Value> = rest.into_iter().map(node).collect();
            out.push(json!({"tag": "view", "bbox": union, "children": texts.into_iter().map(node).collect::<Vec<_>>()}));
            out
        } else if n.name == "SearchBar" {
            return json!({"tag": "view", "bbox": n.bbox, "children": n.children.iter().map(node).collect::<Vec<_>>()});
        } else {
            n.children
                .iter()
                .flat_map(|c| if c.name == "SearchBar" { c.children.iter().map(node).collect() } else { vec![node(c)] })
                .collect()
        };
        json!({"tag": n.tag.as_str().to_lowercase(), "bbox": n.bbox, "children": children})
    }
    json!({ "root": node(&styled.root) })
}

fn write(path: &Path, bytes: &[u8]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/fruit_salad"));
    let doc = document();
    let screenshot = paint(&doc);
    write(&out.join("design.json"), (doc.to_json() + "\n").as_bytes());
    write(&out.join("screen.png"), &encode_png(&screenshot));
    let mockup = Mockup::new(doc.clone(), screenshot).unwrap();

    let state = Arc::new(Mutex::new(None));
    let backend = scripted(doc, state.clone());
    let (client, pipeline) = recording(&backend);
    let tree = run_grouping_chain(&mockup, &client).expect("grouping");
    let (styled, page) = generate_page(&tree, &mockup, &client, StyleMode::Metadata).expect("codegen");
    *state.lock().unwrap() = Some(styled.clone());

    let ok = render_tree(&styled, &mockup);
    let mut two = ok.clone();
    let target = |leaf: &str| {
        styled
            .root
            .containers_postorder()
            .into_iter()
            .find(|n| n.children.iter().any(|c| c.id == leaf))
            .map(|n| n.id.clone())
            .unwrap()
    };
    let targets = [target("card1_bg"), target("tab_home")];
    for id in &targets {
        perturb(&mut two, id, Perturbation::Recolor([200, 0, 120, 255]));
    }
    let snapshots = out.join("snapshots");
    std::fs::create_dir_all(&snapshots).unwrap();
    ok.save(&snapshots, "ok").unwrap();
    two.save(&snapshots, "two").unwrap();

    let refined = refine_page(&page, &styled, &mockup, std::slice::from_ref(&two), &client, 2).expect("refine");
    let replaced: Vec<&str> = refined
        .log
        .iter()
        .filter(|e| e.outcome == Some(RepairOutcome::Replaced))
        .map(|e| e.node_id.as_str())
        .collect();
    assert_eq!(replaced, targets.iter().map(String::as_str).collect::<Vec<_>>());
    write(&out.join("transcripts/pipeline.jsonl"), pipeline.to_jsonl().as_bytes());

    for (name, snap) in [("refine_ok", &ok), ("refine_two", &two)] {
        let (client, store) = recording(&backend);
        refine_page(&page, &styled, &mockup, std::slice::from_ref(snap), &client, 2).expect("refine");
        write(&out.join(format!("transcripts/{name}.jsonl")), store.to_jsonl().as_bytes());
    }

    let truth = serde_json::to_string_pretty(&truth_tree(&styled)).unwrap() + "\n";
    write(&out.join("truth_tree.json"), truth.as_bytes());
    let config = json!({
        "backend": {"mode": "replay", "transcript_path": "transcripts/pipeline.jsonl"},
        "max_concurrency": 4,
        "refine_rounds": 2,
        "style_mode": "deterministic",
        "output_dir": "out"
    });
    write(&out.join("config.json"), (serde_json::to_string_pretty(&config).unwrap() + "\n").as_bytes());
    println!("fixture written to {} (repair targets: {})", out.canonicalize().unwrap_or(out.clone()).display(), targets.join(", "));
}
