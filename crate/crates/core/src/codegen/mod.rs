//! Hierarchy-aware code generation: bottom-up style synthesis from design metadata,
//! per-division component code from the model, and page assembly.

mod page;
mod style;
mod synth;
mod units;

pub use page::{assemble_page, generate_page, root_unit, GeneratedPage, Stylesheet};
pub use style::{Overflow, StyleMap, StyleProp, StyleValue};
pub use synth::{
    aggregate_container_style, apply_llm_leaf_styles, derive_leaf_style, parse_style_response,
    predict_leaf_style_llm, synthesize_styles, StyleMode,
};
pub use units::{
    component_names, element_tags, generate_component_code, parse_components_response,
    referenced_ids, units_from_answer, validate_unit, CodeUnit,
};

use std::path::PathBuf;
use thiserror::Error;

use crate::llm::{LlmError, TemplateName};

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("stage `{stage}`, node {node}: {source}")]
    Llm {
        stage: TemplateName,
        node: String,
        #[source]
        source: LlmError,
    },
    #[error("stage `{stage}`, node {node}: unparseable response: {message}")]
    ResponseParse {
        stage: TemplateName,
        node: String,
        message: String,
    },
    #[error("unit {unit} references unknown node {node_id:?}")]
    UnknownNodeReference { unit: String, node_id: String },
    #[error("unit {unit} does not render its own testID")]
    MissingSelfReference { unit: String },
    #[error("unit {unit} uses element <{tag}>, which is neither a known tag nor a child component")]
    UnknownTag { unit: String, tag: String },
    #[error("no component generated for {node}")]
    MissingUnit { node: String },
    #[error("more than one component generated for {node}")]
    DuplicateUnit { node: String },
    #[error("empty source for {node}")]
    EmptySource { node: String },
    #[error("unit {unit} depends on {dependency}, which is not defined before it")]
    DanglingDependency { unit: String, dependency: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CodegenError {
    pub(crate) fn llm(stage: TemplateName, node: &str, source: LlmError) -> Self {
        CodegenError::Llm {
            stage,
            node: node.to_string(),
            source,
        }
    }
}
