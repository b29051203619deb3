//! Visual (MSE, SSIM, embedding cosine) and structural (TreeBLEU, tree edit distance,
//! container match) scores of a generated page against ground truth.

mod clip;
mod structural;
mod tree;
mod visual;

pub use clip::{clip_score, cosine, EmbedClient, EMBED_URL_ENV};
pub use structural::{
    container_match, height1_subtrees, tree_bleu, tree_edit_distance, zhang_shasha, TedConfig,
};
pub use tree::{parse_metric_tree, MetricNode, MetricTree};
pub use visual::{gaussian_kernel, grayscale_pair, mse, ssim, ssim_gray, Gray, SSIM_SIGMA, SSIM_WINDOW};

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image is empty or sizes are incompatible")]
    EmptyImage,
    #[error("image of {width}x{height} is smaller than the 11x11 SSIM window")]
    ImageTooSmall { width: usize, height: usize },
    #[error("embedding service error: {0}")]
    EmbeddingService(String),
    #[error("degenerate reference: {0}")]
    DegenerateReference(&'static str),
    #[error("container `{0}` has no bbox")]
    MissingBBox(String),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,
    pub tree_bleu: f64,
    pub ted: f64,
    pub container_match: f64,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Two-line table in the usual column order; absent values show as `-`.
    pub fn table(&self) -> String {
        let cols = [
            ("MSE↓", self.mse),
            ("CLIP↑", self.clip),
            ("SSIM↑", self.ssim),
            ("TreeBLEU↑", Some(self.tree_bleu)),
            ("Container Match↑", Some(self.container_match)),
            ("Tree Edit Distance↓", Some(self.ted)),
        ];
        let cells: Vec<(String, String)> = cols
            .iter()
            .map(|(h, v)| (h.to_string(), v.map_or("-".into(), |v| format!("{v:.4}"))))
            .collect();
        let mut out = String::new();
        for (i, row) in [0, 1].iter().enumerate() {
            let line: Vec<String> = cells
                .iter()
                .map(|(h, v)| {
                    let w = h.chars().count().max(v.len());
                    let cell = if *row == 0 { h } else { v };
                    format!("{cell:<w$}")
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
            let _ = i;
        }
        out
    }
}

/// One side of an evaluation: a tree and optionally a screenshot.
#[derive(Debug, Clone)]
pub struct EvalInput {
    pub tree: MetricTree,
    pub image: Option<RgbaImage>,
}

/// Score `pred` against `truth`. Visual scores need both images; the embedding score
/// additionally needs a client.
pub fn evaluate(
    pred: &EvalInput,
    truth: &EvalInput,
    embed: Option<&EmbedClient>,
) -> Result<MetricReport, MetricsError> {
    let (mut mse_v, mut ssim_v, mut clip_v) = (None, None, None);
    if let (Some(p), Some(t)) = (&pred.image, &truth.image) {
        mse_v = Some(mse(t, p)?);
        ssim_v = Some(ssim(t, p)?);
        if let Some(client) = embed {
            clip_v = Some(clip_score(p, t, client)?);
        }
    }
    Ok(MetricReport {
        mse: mse_v,
        ssim: ssim_v,
        clip: clip_v,
        tree_bleu: tree_bleu(&pred.tree, &truth.tree)?,
        ted: tree_edit_distance(&pred.tree, &truth.tree, &TedConfig::default()),
        container_match: container_match(&pred.tree, &truth.tree)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metadata::BBox;
    use image::Rgba;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn sample_tree() -> MetricTree {
        MetricTree::new(
            MetricNode::new(
                "view",
                vec![
                    MetricNode::new("view", vec![MetricNode::new("text", vec![]), MetricNode::new("image", vec![])])
                        .with_bbox(BBox::new(0, 0, 20, 10)),
                    MetricNode::new("button", vec![]),
                ],
            )
            .with_bbox(BBox::new(0, 0, 32, 32)),
        )
    }

    fn sample_image() -> RgbaImage {
        RgbaImage::from_fn(32, 32, |x, y| Rgba([(x * 8) as u8, (y * 8) as u8, 77, 255]))
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let x = EvalInput { tree: sample_tree(), image: Some(sample_image()) };
        let r = evaluate(&x, &x, None).unwrap();
        assert_eq!(
            r,
            MetricReport { mse: Some(0.0), ssim: Some(1.0), clip: None, tree_bleu: 1.0, ted: 0.0, container_match: 1.0 }
        );
        let trees_only = EvalInput { tree: sample_tree(), image: None };
        let r = evaluate(&trees_only, &x, None).unwrap();
        assert!(r.mse.is_none() && r.ssim.is_none());
        assert!(!r.to_json().contains("mse"));
    }

    #[test]
    fn table_lists_columns_in_order() {
        let r = MetricReport { mse: Some(1.5), ssim: None, clip: None, tree_bleu: 0.5, ted: 3.0, container_match: 0.25 };
        let table = r.table();
        let header = table.lines().next().unwrap();
        assert!(header.find("MSE").unwrap() < header.find("CLIP").unwrap());
        assert!(header.find("Container Match").unwrap() < header.find("Tree Edit Distance").unwrap());
        assert!(table.lines().nth(1).unwrap().starts_with("1.5000"));
    }

    /// Serve `answers` to consecutive requests, one connection each.
    fn stub(answers: Vec<String>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for body in answers {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        format!("http://{addr}")
    }

    #[test]
    fn clip_is_the_cosine_of_embeddings() {
        let img = sample_image();
        let same = EmbedClient::new(&stub(vec![r#"{"embedding":[0.6,0.8]}"#.into(); 2]));
        assert!((clip_score(&img, &img, &same).unwrap() - 1.0).abs() < 1e-6);
        let orth = EmbedClient::new(&stub(vec!["[1.0, 0.0]".into(), "[0.0, 2.0]".into()]));
        assert_eq!(clip_score(&img, &img, &orth).unwrap(), 0.0);
    }

    #[test]
    fn unreachable_service_is_an_error() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let client = EmbedClient::new(&format!("http://127.0.0.1:{port}"));
        assert!(matches!(client.embed(&sample_image()), Err(MetricsError::EmbeddingService(_))));
    }
}
