use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },
    #[error("sequence length {len} outside [1, {max}]")]
    BadSequenceLength { len: usize, max: usize },
    #[error("augmentation magnitude p={0} outside [0, 1]")]
    MagnitudeOutOfRange(f64),
    #[error("noise standard deviation must be >= 0, got {0}")]
    NegativeSigma(f64),
    #[error("invalid noise schedule: {0}")]
    InvalidSchedule(String),
    #[error("timestep {t} out of range for schedule with {steps} steps")]
    TimestepOutOfRange { t: usize, steps: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("training diverged at step {step} (loss = {loss})")]
    Diverged { step: usize, loss: f64 },
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("invalid perturbation config: {0}")]
    InvalidPerturbConfig(String),
    #[error("template {0:?} does not match \"a photo of sks <item>\"")]
    BadTemplate(String),
    #[error("could only generate {got} of {wanted} distinct prompts in {attempts} attempts")]
    PerturbExhausted { got: usize, wanted: usize, attempts: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("feature vector has zero norm")]
    DegenerateFeature,
    #[error("vector is not unit-norm (norm = {0})")]
    NotUnitNorm(f64),
    #[error("set sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("report has no categories")]
    EmptyReport,
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("category {category}: {source}")]
    Category {
        category: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn in_category(self, category: &str) -> Self {
        Error::Category {
            category: category.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping category context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Category { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by numerics (divergence, degenerate features)
    /// rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::Diverged { .. } | Error::NonFinite(_) | Error::DegenerateFeature | Error::NotUnitNorm(_)
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
