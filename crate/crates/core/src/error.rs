use std::fmt;

/// Pipeline stage a failure originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    RenderDepth,
    CompleteDepth,
    Unproject,
    OutlierRemoval,
    Merge,
    Finetune,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::RenderDepth => "render-depth",
            Stage::CompleteDepth => "complete-depth",
            Stage::Unproject => "unproject",
            Stage::OutlierRemoval => "outlier-removal",
            Stage::Merge => "merge",
            Stage::Finetune => "finetune",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported camera model `{0}`")]
    UnsupportedModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate depth: {0}")]
    DegenerateDepth(String),
    #[error("empty result: {0}")]
    EmptyResult(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("optimization diverged at iteration {iteration}")]
    OptimizationDiverged { iteration: usize },
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("image codec error: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Strips stage tags and returns the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Image(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
