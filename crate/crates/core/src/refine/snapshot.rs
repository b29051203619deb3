use image::RgbaImage;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use super::RefineError;
use crate::metadata::{encode_png, load_image, BBox};

/// One rendered element as captured from the running app.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotElement {
    pub id: String,
    pub bbox: BBox,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

/// The on-disk form of a snapshot: screenshot path plus elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub screenshot: String,
    pub elements: Vec<SnapshotElement>,
}

/// Parse a snapshot file and check that element ids are unique.
pub fn parse_snapshot_file(bytes: &[u8]) -> Result<SnapshotFile, RefineError> {
    let file: SnapshotFile = serde_json::from_slice(bytes)
        .map_err(|e| RefineError::MalformedSnapshot(e.to_string()))?;
    check_unique(&file.elements)?;
    Ok(file)
}

fn check_unique(elements: &[SnapshotElement]) -> Result<(), RefineError> {
    let mut seen = HashSet::new();
    match elements.iter().find(|e| !seen.insert(e.id.as_str())) {
        Some(e) => Err(RefineError::MalformedSnapshot(format!("duplicate element id {:?}", e.id))),
        None => Ok(()),
    }
}

/// A rendered page: screenshot plus the elements found in it.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderSnapshot {
    pub screenshot: RgbaImage,
    pub elements: Vec<SnapshotElement>,
}

impl RenderSnapshot {
    /// Check that every element lies within the screenshot.
    pub fn new(screenshot: RgbaImage, elements: Vec<SnapshotElement>) -> Result<Self, RefineError> {
        let bounds = BBox::new(0, 0, screenshot.width() as i64, screenshot.height() as i64);
        check_unique(&elements)?;
        for e in &elements {
            if !bounds.contains(&e.bbox) {
                return Err(RefineError::MalformedSnapshot(format!(
                    "element {:?} bbox {} lies outside the {}x{} screenshot",
                    e.id, e.bbox, bounds.w, bounds.h
                )));
            }
        }
        Ok(RenderSnapshot { screenshot, elements })
    }

    pub fn element(&self, id: &str) -> Option<&SnapshotElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    /// Write `<stem>.json` and `<stem>.png` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), RefineError> {
        let file = SnapshotFile {
            screenshot: format!("{stem}.png"),
            elements: self.elements.clone(),
        };
        let json = serde_json::to_string_pretty(&file).expect("snapshot serializes") + "\n";
        let write = |name: String, bytes: &[u8]| {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| RefineError::Io { path, source })
        };
        write(format!("{stem}.json"), json.as_bytes())?;
        write(format!("{stem}.png"), &encode_png(&self.screenshot))
    }
}

/// Read a snapshot file; its screenshot path is resolved against the file's directory.
pub fn load_render_snapshot(path: &Path) -> Result<RenderSnapshot, RefineError> {
    let bytes = std::fs::read(path).map_err(|source| RefineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file = parse_snapshot_file(&bytes)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let screenshot = load_image(&dir.join(&file.screenshot)).map_err(RefineError::Metadata)?;
    RenderSnapshot::new(screenshot, file.elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn element(id: &str, bbox: BBox) -> SnapshotElement {
        SnapshotElement {
            id: id.into(),
            bbox,
            kind: "View".into(),
            text: None,
            parent: None,
        }
    }

    #[test]
    fn six_elements_load_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let elements: Vec<_> = (0..6).map(|i| element(&format!("e{i}"), BBox::new(i, i, 5, 5))).collect();
        let snap = RenderSnapshot::new(RgbaImage::new(20, 20), elements).unwrap();
        snap.save(dir.path(), "render").unwrap();
        let back = load_render_snapshot(&dir.path().join("render.json")).unwrap();
        assert_eq!(back.elements.len(), 6);
        assert_eq!(back, snap);
    }

    #[test]
    fn out_of_bounds_and_duplicates_are_rejected() {
        let img = RgbaImage::new(20, 20);
        assert!(matches!(
            RenderSnapshot::new(img.clone(), vec![element("a", BBox::new(15, 0, 10, 5))]),
            Err(RefineError::MalformedSnapshot(_))
        ));
        let dup = br#"{"screenshot":"s.png","elements":[
            {"id":"a","bbox":[0,0,1,1],"kind":"View"},{"id":"a","bbox":[0,0,1,1],"kind":"Text"}]}"#;
        assert!(matches!(parse_snapshot_file(dup), Err(RefineError::MalformedSnapshot(_))));
        assert!(matches!(parse_snapshot_file(b"{"), Err(RefineError::MalformedSnapshot(_))));
    }
}
