use breadthcloud::concepts::ConceptError;
use breadthcloud::corpus::CorpusError;
use breadthcloud::layout::LayoutError;
use breadthcloud::llm::GatewayError;
use breadthcloud::mapping::MappingError;
use breadthcloud::salience::SalienceError;
use breadthcloud::util::FileError;
use thiserror::Error;

/// Command failure, classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration; nothing was attempted.
    #[error("{0}")]
    Validation(String),
    /// A named condition, transcript, or prerequisite artifact does not exist.
    #[error("{0}")]
    Missing(String),
    /// The model backend failed or answered unusably.
    #[error("{0}")]
    Gateway(String),
    /// Inputs or artifacts on disk are missing, malformed, or inconsistent.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Missing(_) => 2,
            CliError::Gateway(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Template(_) | GatewayError::UnboundPlaceholder { .. } => {
                CliError::Validation(e.to_string())
            }
            GatewayError::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Gateway(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::UnknownCondition { .. } | CorpusError::UnknownTranscript(_) => {
                CliError::Missing(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FileError> for CliError {
    fn from(e: FileError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConceptError> for CliError {
    fn from(e: ConceptError) -> Self {
        match e {
            ConceptError::Gateway(g) => g.into(),
            ConceptError::Corpus(c) => c.into(),
            ConceptError::File(f) => f.into(),
            ConceptError::Underfull { .. } | ConceptError::MissingGroup(_) => {
                CliError::Gateway(e.to_string())
            }
            ConceptError::VersionMismatch { .. } => CliError::Data(e.to_string()),
            ConceptError::UnknownKey(_) => CliError::Missing(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MappingError> for CliError {
    fn from(e: MappingError) -> Self {
        match e {
            MappingError::Gateway(g) => g.into(),
            MappingError::Corpus(c) => c.into(),
            MappingError::File(f) => f.into(),
            MappingError::UnknownRow(_) | MappingError::UnknownConcept(_) => {
                CliError::Missing(e.to_string())
            }
            MappingError::InvalidTau(_) | MappingError::EmptyVocabulary => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SalienceError> for CliError {
    fn from(e: SalienceError) -> Self {
        match e {
            SalienceError::SameCondition(_) | SalienceError::UnknownScale(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LayoutError> for CliError {
    fn from(e: LayoutError) -> Self {
        CliError::Validation(e.to_string())
    }
}
