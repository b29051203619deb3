//! Command failures and their exit codes.

use std::fmt;

use designcoder::codegen::CodegenError;
use designcoder::grouping::GroupingError;
use designcoder::llm::LlmError;
use designcoder::metadata::MetadataError;
use designcoder::metrics::MetricsError;
use designcoder::refine::RefineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    /// Filesystem or locking trouble unrelated to input content.
    Io = 1,
    Parse = 2,
    Backend = 3,
    Invariant = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub class: ExitClass,
    pub stage: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(class: ExitClass, stage: &'static str, message: impl fmt::Display) -> Self {
        Failure { class, stage, message: message.to_string() }
    }

    pub fn code(&self) -> u8 {
        self.class as u8
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

fn metadata_class(e: &MetadataError) -> ExitClass {
    match e {
        MetadataError::EmptyInput | MetadataError::EmptyCrop(_) => ExitClass::Invariant,
        _ => ExitClass::Parse,
    }
}

pub fn metadata(stage: &'static str, e: MetadataError) -> Failure {
    Failure::new(metadata_class(&e), stage, e)
}

/// Failures while loading a transcript are input errors; everything else is the backend.
pub fn llm(stage: &'static str, e: LlmError) -> Failure {
    let class = match e {
        LlmError::Io { .. } | LlmError::MalformedTranscript { .. } => ExitClass::Parse,
        _ => ExitClass::Backend,
    };
    Failure::new(class, stage, e)
}

pub fn grouping(e: GroupingError) -> Failure {
    let class = match &e {
        GroupingError::Llm { .. } | GroupingError::ResponseParse { .. } => ExitClass::Backend,
        GroupingError::DivisionCount { .. } | GroupingError::ArityMismatch { .. } => ExitClass::Invariant,
        GroupingError::Metadata { source, .. } => metadata_class(source),
    };
    Failure::new(class, "group", e)
}

pub fn codegen(e: CodegenError) -> Failure {
    let class = match &e {
        CodegenError::Llm { .. } | CodegenError::ResponseParse { .. } => ExitClass::Backend,
        CodegenError::Io { .. } => ExitClass::Io,
        _ => ExitClass::Invariant,
    };
    Failure::new(class, "generate", e)
}

pub fn refine(e: RefineError) -> Failure {
    let class = match &e {
        RefineError::MalformedSnapshot(_) | RefineError::Io { .. } => ExitClass::Parse,
        RefineError::Metadata(m) => metadata_class(m),
        RefineError::Llm { .. } | RefineError::ResponseParse { .. } => ExitClass::Backend,
        RefineError::NothingToRepair { .. } => ExitClass::Invariant,
    };
    Failure::new(class, "refine", e)
}

pub fn metrics(e: MetricsError) -> Failure {
    let class = match &e {
        MetricsError::EmbeddingService(_) => ExitClass::Backend,
        _ => ExitClass::Parse,
    };
    Failure::new(class, "evaluate", e)
}
