//! Turns design mockups (layer metadata plus a screenshot) into component trees and
//! declarative UI code through a chain of multimodal model calls, then repairs the code
//! against rendered snapshots and scores the results.

pub mod codegen;
pub mod grouping;
pub mod llm;
pub mod metadata;
pub mod metrics;
pub mod naming;
pub mod refine;

/// The image crate, so callers can name the raster types used throughout.
pub use image;
