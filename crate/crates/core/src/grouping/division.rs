use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::metadata::{bbox_intersection_area, bbox_union, BBox, LayerEntry};
use crate::naming::{pascal_case, unique_name};

/// Allowed number of regions in a division answer.
pub const MIN_DIVISIONS: usize = 3;
pub const MAX_DIVISIONS: usize = 10;
/// A layer covering at least this share of the screen is a background.
pub const BACKGROUND_COVERAGE: f64 = 0.9;

/// A sub-region of the screen: member layers plus their union bbox.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Division {
    pub id: String,
    pub label: String,
    pub layer_ids: Vec<String>,
    pub bbox: BBox,
}

/// A region as proposed by the model, before correction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedDivision {
    #[serde(default)]
    pub label: String,
    pub layer_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("{count} regions proposed; between 3 and 10 required")]
pub struct RollbackNeeded {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectedDivisions {
    /// Sorted by reading order of their bboxes, ids `div_0`, `div_1`, …
    pub divisions: Vec<Division>,
    /// Background layers, attached to the tree root instead of a division.
    pub background: Vec<String>,
    /// Number of pairwise merges performed.
    pub merges: usize,
}

pub fn is_background(bbox: &BBox, screen: &BBox) -> bool {
    let covered = bbox_intersection_area(bbox, screen) as f64;
    screen.area() > 0 && covered >= BACKGROUND_COVERAGE * screen.area() as f64
}

struct Working {
    label: String,
    members: Vec<usize>,
    bbox: BBox,
}

impl Working {
    fn recompute(&mut self, layers: &[LayerEntry]) {
        self.members.sort_unstable();
        let boxes: Vec<BBox> = self.members.iter().map(|&i| layers[i].bbox).collect();
        self.bbox = bbox_union(&boxes).expect("division has members");
    }
}

/// Validate and repair a proposed division set so that every non-background layer
/// lands in exactly one region and no two regions overlap.
pub fn check_and_postprocess(
    proposed: &[ProposedDivision],
    layers: &[LayerEntry],
    screen: &BBox,
) -> Result<CorrectedDivisions, RollbackNeeded> {
    let index: HashMap<&str, usize> = layers
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id.as_str(), i))
        .collect();
    let background: HashSet<usize> = layers
        .iter()
        .enumerate()
        .filter(|(_, l)| is_background(&l.bbox, screen))
        .map(|(i, _)| i)
        .collect();

    // Drop unknown ids, background layers and repeats; a region made only of
    // zero-area layers does not stand on its own.
    let mut assigned = vec![false; layers.len()];
    let mut work: Vec<Working> = Vec::new();
    for p in proposed {
        let mut members = Vec::new();
        for id in &p.layer_ids {
            if let Some(&i) = index.get(id.as_str()) {
                if !background.contains(&i) && !assigned[i] {
                    assigned[i] = true;
                    members.push(i);
                }
            }
        }
        if members.is_empty() {
            continue;
        }
        if members.iter().all(|&i| layers[i].bbox.is_degenerate()) {
            for &i in &members {
                assigned[i] = false;
            }
            continue;
        }
        let mut w = Working {
            label: p.label.clone(),
            members,
            bbox: BBox::new(0, 0, 0, 0),
        };
        w.recompute(layers);
        work.push(w);
    }

    if work.len() < MIN_DIVISIONS || work.len() > MAX_DIVISIONS {
        return Err(RollbackNeeded { count: work.len() });
    }

    let mut merges = 0;
    for (li, layer) in layers.iter().enumerate() {
        if assigned[li] || background.contains(&li) {
            continue;
        }
        let hits: Vec<usize> = (0..work.len())
            .filter(|&d| work[d].bbox.overlaps(&layer.bbox))
            .collect();
        let target = if let Some((&keep, rest)) = hits.split_first() {
            for &d in rest.iter().rev() {
                let gone = work.remove(d);
                work[keep].members.extend(gone.members);
                merges += 1;
            }
            keep
        } else {
            nearest_by_center(&work, &layer.bbox)
        };
        work[target].members.push(li);
        work[target].recompute(layers);
        assigned[li] = true;
    }

    while let Some((i, j)) = first_overlap(&work) {
        let gone = work.remove(j);
        work[i].members.extend(gone.members);
        work[i].recompute(layers);
        merges += 1;
    }

    let mut order: Vec<usize> = (0..work.len()).collect();
    order.sort_by_key(|&i| (work[i].bbox.reading_key(), i));
    let mut labels = HashSet::new();
    let divisions = order
        .into_iter()
        .enumerate()
        .map(|(n, i)| {
            let w = &work[i];
            let label = unique_name(&pascal_case(&w.label, "Region"), &mut labels);
            Division {
                id: format!("div_{n}"),
                label,
                layer_ids: w.members.iter().map(|&m| layers[m].id.clone()).collect(),
                bbox: w.bbox,
            }
        })
        .collect();
    let mut background: Vec<usize> = background.into_iter().collect();
    background.sort_unstable();
    Ok(CorrectedDivisions {
        divisions,
        background: background.into_iter().map(|i| layers[i].id.clone()).collect(),
        merges,
    })
}

/// Euclidean distance between centers; ties go to the lower index.
fn nearest_by_center(work: &[Working], bbox: &BBox) -> usize {
    let (cx, cy) = bbox.center();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, w) in work.iter().enumerate() {
        let (dx, dy) = w.bbox.center();
        let d = (dx - cx).hypot(dy - cy);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn first_overlap(work: &[Working]) -> Option<(usize, usize)> {
    for i in 0..work.len() {
        for j in i + 1..work.len() {
            if work[i].bbox.overlaps(&work[j].bbox) {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DivisionsAnswer {
    Wrapped { divisions: Vec<ProposedDivision> },
    Bare(Vec<ProposedDivision>),
}

/// Parse a division answer: `{"divisions": [...]}` or a bare list.
pub fn parse_divisions_response(text: &str) -> Result<Vec<ProposedDivision>, String> {
    match crate::llm::parse_json_response::<DivisionsAnswer>(text)? {
        DivisionsAnswer::Wrapped { divisions } | DivisionsAnswer::Bare(divisions) => Ok(divisions),
    }
}
