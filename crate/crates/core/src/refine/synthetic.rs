use image::{Rgba, RgbaImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use super::{RenderSnapshot, SnapshotElement};
use crate::grouping::{ComponentNode, ComponentTree};
use crate::metadata::{BBox, Mockup};

/// A defect injected into a synthetic render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// Move the component's pixels and bbox.
    Shift { dx: i64, dy: i64 },
    /// Remove the component and its descendants from the render.
    Drop,
    /// Blend the component's pixels halfway towards a color.
    Recolor([u8; 4]),
    /// Render the component with zero area.
    Collapse,
}

/// A faithful render of `tree`: the design screenshot plus one element per node.
pub fn render_tree(tree: &ComponentTree, mockup: &Mockup) -> RenderSnapshot {
    let screen = mockup.doc.screen.rect();
    let mut elements = Vec::new();
    fn walk(n: &ComponentNode, parent: Option<&str>, screen: &BBox, mockup: &Mockup, out: &mut Vec<SnapshotElement>) {
        out.push(SnapshotElement {
            id: n.id.clone(),
            bbox: n.bbox.clamp_to(screen),
            kind: n.tag.as_str().to_string(),
            text: mockup.doc.layer(&n.id).and_then(|l| l.text.as_ref()).map(|t| t.content.clone()),
            parent: parent.map(str::to_string),
        });
        for c in &n.children {
            walk(c, Some(&n.id), screen, mockup, out);
        }
    }
    walk(&tree.root, None, &screen, mockup, &mut elements);
    RenderSnapshot {
        screenshot: mockup.screenshot.clone(),
        elements,
    }
}

fn region(img: &RgbaImage, b: &BBox) -> impl Iterator<Item = (u32, u32)> {
    let bounds = BBox::new(0, 0, img.width() as i64, img.height() as i64);
    let c = b.clamp_to(&bounds);
    (c.y..c.bottom()).flat_map(move |y| (c.x..c.right()).map(move |x| (x as u32, y as u32)))
}

/// Apply `perturbation` to the element `id` (no-op when absent).
pub fn perturb(snapshot: &mut RenderSnapshot, id: &str, perturbation: Perturbation) {
    let Some(idx) = snapshot.elements.iter().position(|e| e.id == id) else {
        return;
    };
    let bbox = snapshot.elements[idx].bbox;
    let bounds = BBox::new(0, 0, snapshot.screenshot.width() as i64, snapshot.screenshot.height() as i64);
    match perturbation {
        Perturbation::Shift { dx, dy } => {
            let moved = BBox::new(bbox.x + dx, bbox.y + dy, bbox.w, bbox.h).clamp_to(&bounds);
            let src = snapshot.screenshot.clone();
            for (x, y) in region(&src, &moved) {
                let (sx, sy) = (x as i64 - dx, y as i64 - dy);
                if bounds.contains(&BBox::new(sx, sy, 1, 1)) {
                    snapshot.screenshot.put_pixel(x, y, *src.get_pixel(sx as u32, sy as u32));
                }
            }
            snapshot.elements[idx].bbox = moved;
        }
        Perturbation::Drop => {
            for (x, y) in region(&snapshot.screenshot.clone(), &bbox) {
                snapshot.screenshot.put_pixel(x, y, Rgba([255, 255, 255, 255]));
            }
            let mut gone: HashSet<String> = HashSet::from([id.to_string()]);
            // parents precede children in the element list
            for e in &snapshot.elements {
                if e.parent.as_ref().is_some_and(|p| gone.contains(p)) {
                    gone.insert(e.id.clone());
                }
            }
            snapshot.elements.retain(|e| !gone.contains(&e.id));
        }
        Perturbation::Recolor(c) => {
            for (x, y) in region(&snapshot.screenshot.clone(), &bbox) {
                let p = snapshot.screenshot.get_pixel_mut(x, y);
                for k in 0..4 {
                    p.0[k] = ((p.0[k] as u16 + c[k] as u16) / 2) as u8;
                }
            }
        }
        Perturbation::Collapse => {
            snapshot.elements[idx].bbox = BBox::new(bbox.x, bbox.y, 0, 0);
        }
    }
}

/// Pick `count` distinct non-root containers and a random defect for each.
pub fn random_perturbations(tree: &ComponentTree, count: usize, seed: u64) -> Vec<(String, Perturbation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<&str> = tree
        .root
        .containers_postorder()
        .into_iter()
        .filter(|n| n.id != tree.root.id)
        .map(|n| n.id.as_str())
        .collect();
    ids.shuffle(&mut rng);
    ids.into_iter()
        .take(count)
        .map(|id| {
            let p = match rng.gen_range(0..4) {
                0 => Perturbation::Shift {
                    dx: rng.gen_range(-12..=12),
                    dy: rng.gen_range(-12..=12),
                },
                1 => Perturbation::Drop,
                2 => Perturbation::Recolor([rng.gen(), rng.gen(), rng.gen(), 255]),
                _ => Perturbation::Collapse,
            };
            (id.to_string(), p)
        })
        .collect()
}
