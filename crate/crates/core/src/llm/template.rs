use regex::Regex;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use image::RgbaImage;
use serde::{Deserialize, Serialize};

use super::{Attachment, Decoding, LlmError, LlmRequest};

/// Version tag of the bundled prompt wording.
pub const TEMPLATE_VERSION: &str = "v1";

const SECTION_MARKER: &str = "---- user ----\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateName {
    Divide,
    Semantic,
    Group,
    Code,
    Style,
    Analysis,
    Repair,
}

impl TemplateName {
    pub const ALL: [TemplateName; 7] = [
        TemplateName::Divide,
        TemplateName::Semantic,
        TemplateName::Group,
        TemplateName::Code,
        TemplateName::Style,
        TemplateName::Analysis,
        TemplateName::Repair,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Divide => "divide",
            TemplateName::Semantic => "semantic",
            TemplateName::Group => "group",
            TemplateName::Code => "code",
            TemplateName::Style => "style",
            TemplateName::Analysis => "analysis",
            TemplateName::Repair => "repair",
        }
    }

    fn source(self) -> &'static str {
        match self {
            TemplateName::Divide => include_str!("../../templates/v1/divide.txt"),
            TemplateName::Semantic => include_str!("../../templates/v1/semantic.txt"),
            TemplateName::Group => include_str!("../../templates/v1/group.txt"),
            TemplateName::Code => include_str!("../../templates/v1/code.txt"),
            TemplateName::Style => include_str!("../../templates/v1/style.txt"),
            TemplateName::Analysis => include_str!("../../templates/v1/analysis.txt"),
            TemplateName::Repair => include_str!("../../templates/v1/repair.txt"),
        }
    }

    /// Number of images the prompt carries.
    pub fn image_arity(self) -> usize {
        match self {
            TemplateName::Divide
            | TemplateName::Semantic
            | TemplateName::Group
            | TemplateName::Code => 1,
            TemplateName::Analysis => 2,
            TemplateName::Style | TemplateName::Repair => 0,
        }
    }

    fn response_schema(self) -> &'static str {
        match self {
            TemplateName::Divide => "divisions",
            TemplateName::Semantic => "semantics",
            TemplateName::Group => "subtree",
            TemplateName::Code => "components",
            TemplateName::Style => "style_map",
            TemplateName::Analysis => "verdict",
            TemplateName::Repair => "source",
        }
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub system_text: String,
    pub user_text_skeleton: String,
    pub image_arity: usize,
    pub response_schema: &'static str,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_][a-z0-9_]*)\}\}").unwrap())
}

impl PromptTemplate {
    /// The bundled template for `name`.
    pub fn builtin(name: TemplateName) -> PromptTemplate {
        let src = name.source();
        let (system, user) = src
            .split_once(SECTION_MARKER)
            .expect("bundled template has a user section");
        PromptTemplate {
            name,
            system_text: system.trim_end().to_string(),
            user_text_skeleton: user.trim_end().to_string(),
            image_arity: name.image_arity(),
            response_schema: name.response_schema(),
        }
    }

    pub fn expects_image(&self) -> bool {
        self.image_arity > 0
    }

    pub fn placeholders(&self) -> Vec<&str> {
        placeholder_re()
            .captures_iter(&self.user_text_skeleton)
            .map(|c| c.get(1).unwrap().as_str())
            .collect()
    }

    /// Bind every placeholder and attach images. Bound values are inserted verbatim and
    /// never re-scanned for placeholders.
    pub fn render(
        &self,
        bindings: &BTreeMap<&str, String>,
        images: Vec<Arc<RgbaImage>>,
        decoding: Decoding,
    ) -> Result<LlmRequest, LlmError> {
        if images.len() != self.image_arity {
            return Err(LlmError::ImageArityMismatch {
                template: self.name,
                expected: self.image_arity,
                got: images.len(),
            });
        }
        let mut out = String::with_capacity(self.user_text_skeleton.len());
        let mut last = 0;
        for cap in placeholder_re().captures_iter(&self.user_text_skeleton) {
            let whole = cap.get(0).unwrap();
            let key = cap.get(1).unwrap().as_str();
            let value = bindings.get(key).ok_or_else(|| LlmError::UnboundPlaceholder {
                template: self.name,
                placeholder: key.to_string(),
            })?;
            out.push_str(&self.user_text_skeleton[last..whole.start()]);
            out.push_str(value);
            last = whole.end();
        }
        out.push_str(&self.user_text_skeleton[last..]);
        Ok(LlmRequest {
            template: self.name,
            system_text: self.system_text.clone(),
            rendered_text: out,
            images: images.into_iter().map(Attachment::new).collect(),
            decoding,
        })
    }
}

/// Shorthand for building binding maps.
pub fn bindings<const N: usize>(pairs: [(&'static str, String); N]) -> BTreeMap<&'static str, String> {
    pairs.into_iter().collect()
}
