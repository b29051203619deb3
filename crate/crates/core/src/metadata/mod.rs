//! Design-document ingestion, the flat layer list and geometry/raster helpers.

mod bbox;
mod document;
mod raster;
mod style;

pub use bbox::{bbox_intersection_area, bbox_union, BBox, COORD_LIMIT};
pub use document::{
    extract_layer_list, parse_design_document, DesignDocument, Layer, LayerEntry, LayerKind,
    Mockup, Screen,
};
pub use raster::{crop_region, decode_png, encode_png, image_digest, load_image};
pub use style::{Opacity, Px, Rgba, Shadow, StyleAttrs, TextAttrs};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("malformed design document: {0}")]
    MalformedDocument(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("screenshot is {actual:?} but screen is {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("bbox union of an empty list")]
    EmptyInput,
    #[error("crop of {0} is empty after clamping")]
    EmptyCrop(BBox),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode image {path}: {message}")]
    Image { path: PathBuf, message: String },
}
