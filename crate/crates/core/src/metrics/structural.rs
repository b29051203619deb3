use std::collections::{HashMap, HashSet};

use super::{MetricNode, MetricTree, MetricsError};

/// Unit costs of the tree edit operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TedConfig {
    pub insert: f64,
    pub delete: f64,
    /// Cost of relabeling a node to a different tag; equal tags cost nothing.
    pub relabel: f64,
}

impl Default for TedConfig {
    fn default() -> Self {
        TedConfig {
            insert: 1.0,
            delete: 1.0,
            relabel: 1.0,
        }
    }
}

/// `parent(child,child,...)` for every internal node, in pre-order.
pub fn height1_subtrees(t: &MetricTree) -> Vec<String> {
    t.internal_nodes()
        .into_iter()
        .map(|n| {
            let kids: Vec<&str> = n.children.iter().map(|c| c.tag.as_str()).collect();
            format!("{}({})", n.tag, kids.join(","))
        })
        .collect()
}

/// Share of the reference's height-1 subtrees found in `t` (multiset intersection).
pub fn tree_bleu(t: &MetricTree, reference: &MetricTree) -> Result<f64, MetricsError> {
    let want = height1_subtrees(reference);
    if want.is_empty() {
        return Err(MetricsError::DegenerateReference("reference has no internal node"));
    }
    let mut have: HashMap<String, usize> = HashMap::new();
    for s in height1_subtrees(t) {
        *have.entry(s).or_default() += 1;
    }
    let mut hits = 0usize;
    for s in &want {
        if let Some(c) = have.get_mut(s).filter(|c| **c > 0) {
            *c -= 1;
            hits += 1;
        }
    }
    Ok(hits as f64 / want.len() as f64)
}

struct Postorder<'a> {
    tags: Vec<&'a str>,
    /// Post-order index of each node's leftmost leaf descendant.
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(root: &'a MetricNode) -> Self {
        fn walk<'a>(n: &'a MetricNode, tags: &mut Vec<&'a str>, lld: &mut Vec<usize>) -> usize {
            let mut first = None;
            for c in &n.children {
                let l = walk(c, tags, lld);
                first.get_or_insert(l);
            }
            let l = first.unwrap_or(tags.len());
            tags.push(&n.tag);
            lld.push(l);
            l
        }
        let (mut tags, mut lld) = (Vec::new(), Vec::new());
        walk(root, &mut tags, &mut lld);
        // a keyroot is the highest node sharing its leftmost leaf
        let mut last: HashMap<usize, usize> = HashMap::new();
        for (i, &l) in lld.iter().enumerate() {
            last.insert(l, i);
        }
        let mut keyroots: Vec<usize> = last.into_values().collect();
        keyroots.sort_unstable();
        Postorder { tags, lld, keyroots }
    }
}

/// Ordered tree edit distance (Zhang–Shasha) without any fallback.
pub fn zhang_shasha(t: &MetricTree, r: &MetricTree, cfg: &TedConfig) -> f64 {
    let (a, b) = match (&t.root, &r.root) {
        (None, None) => return 0.0,
        (None, Some(_)) => return r.node_count() as f64 * cfg.insert,
        (Some(_), None) => return t.node_count() as f64 * cfg.delete,
        (Some(a), Some(b)) => (Postorder::new(a), Postorder::new(b)),
    };
    let (n, m) = (a.tags.len(), b.tags.len());
    let mut td = vec![vec![0.0f64; m]; n];
    let mut fd = vec![vec![0.0f64; m + 1]; n + 1];
    for &i in &a.keyroots {
        for &j in &b.keyroots {
            let (li, lj) = (a.lld[i], b.lld[j]);
            // fd[x][y]: forest a[li..li+x) vs b[lj..lj+y)
            fd[0][0] = 0.0;
            for x in 1..=i - li + 1 {
                fd[x][0] = fd[x - 1][0] + cfg.delete;
            }
            for y in 1..=j - lj + 1 {
                fd[0][y] = fd[0][y - 1] + cfg.insert;
            }
            for x in 1..=i - li + 1 {
                let di = li + x - 1;
                for y in 1..=j - lj + 1 {
                    let dj = lj + y - 1;
                    let del = fd[x - 1][y] + cfg.delete;
                    let ins = fd[x][y - 1] + cfg.insert;
                    if a.lld[di] == li && b.lld[dj] == lj {
                        let rel = if a.tags[di] == b.tags[dj] { 0.0 } else { cfg.relabel };
                        fd[x][y] = del.min(ins).min(fd[x - 1][y - 1] + rel);
                        td[di][dj] = fd[x][y];
                    } else {
                        let (p, q) = (a.lld[di] - li, b.lld[dj] - lj);
                        fd[x][y] = del.min(ins).min(fd[p][q] + td[di][dj]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// Edit distance from `t` to `reference`. When the prediction is empty or shares no
/// tag with a non-empty reference, the reference's edge count is returned instead.
pub fn tree_edit_distance(t: &MetricTree, reference: &MetricTree, cfg: &TedConfig) -> f64 {
    if reference.root.is_some() {
        let ref_tags: HashSet<&str> = reference.nodes().iter().map(|n| n.tag.as_str()).collect();
        if !t.nodes().iter().any(|n| ref_tags.contains(n.tag.as_str())) {
            return reference.edge_count() as f64;
        }
    }
    zhang_shasha(t, reference, cfg)
}

/// Mean over reference containers of the best IoU with any predicted container.
pub fn container_match(t: &MetricTree, reference: &MetricTree) -> Result<f64, MetricsError> {
    let boxes = |tree: &MetricTree| {
        tree.internal_nodes()
            .into_iter()
            .map(|n| n.bbox.ok_or_else(|| MetricsError::MissingBBox(n.tag.clone())))
            .collect::<Result<Vec<_>, _>>()
    };
    let want = boxes(reference)?;
    if want.is_empty() {
        return Err(MetricsError::DegenerateReference("reference has no container"));
    }
    let have = boxes(t)?;
    if have.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = want
        .iter()
        .map(|r| have.iter().map(|p| p.iou(r)).fold(0.0, f64::max))
        .sum();
    Ok(total / want.len() as f64)
}
