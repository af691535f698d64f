use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: empty file")]
    EmptyFile { path: PathBuf },
    #[error("{path}, line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid dataset file: {0}")]
    Format(String),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("feature column `{0}` is not numeric; drop it before binarizing")]
    NonNumericFeature(String),
    #[error("unrecognised label `{label}` at row {row}")]
    UnknownLabel { label: String, row: usize },
    #[error("both classes required: {0}")]
    SingleClass(String),
    #[error("input files disagree on header: {0}")]
    HeaderMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("feature names do not match: {0}")]
    FeatureMismatch(String),
    #[error("dataset is already standardised with scaler {0}; refit before scaling again")]
    AlreadyScaled(String),
    #[error("dimension mismatch: model expects {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

/// Pipeline stage names carried by [`Error::Stage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Scale,
    Select,
    Split,
    Train,
    Evaluate,
    Cv,
    Explain,
    Write,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Scale => "scale",
            Stage::Select => "select",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Cv => "cv",
            Stage::Explain => "explain",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

impl Error {
    pub fn at(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Process exit status: 2 configuration, 3 data, 4 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage {
                stage: Stage::Config, ..
            }
            | Error::Config(_) => 2,
            Error::Stage {
                stage: Stage::Train | Stage::Cv,
                source,
            } => match **source {
                Error::Config(_) => 2,
                _ => 4,
            },
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches a stage name to the error of a fallible step.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
