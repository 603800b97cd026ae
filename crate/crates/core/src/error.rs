use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("structure error at level {level}: {detail}")]
    Structure { level: usize, detail: String },
    #[error("depth error: level {requested} requested, only {available} available")]
    Depth { requested: usize, available: usize },
    #[error("argument error: {0}")]
    Argument(String),
    #[error("parameter error: {0}")]
    Param(String),
    #[error("rank error: {0}")]
    Rank(String),
    #[error("primitivity error: {0}")]
    Primitivity(String),
    #[error("singular incidence matrix at level {level}")]
    Singular { level: usize },
    #[error("partition error: {0}")]
    Partition(String),
    #[error("invariance error at level {level}: {detail}")]
    Invariance { level: usize, detail: String },
    #[error("extension is infinite: {0}")]
    InfiniteExtension(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("substitution is not prolongable: {0}")]
    NotProlongable(String),
    #[error("window error: {0}")]
    Window(String),
    #[error("rarity error: {0}")]
    Rarity(String),
    #[error("maximal path: {0}")]
    MaximalPath(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable name used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "SchemaError",
            Error::Structure { .. } => "StructureError",
            Error::Depth { .. } => "DepthError",
            Error::Argument(_) => "ArgumentError",
            Error::Param(_) => "ParamError",
            Error::Rank(_) => "RankError",
            Error::Primitivity(_) => "PrimitivityError",
            Error::Singular { .. } => "SingularError",
            Error::Partition(_) => "PartitionError",
            Error::Invariance { .. } => "InvarianceError",
            Error::InfiniteExtension(_) => "InfiniteExtensionError",
            Error::Inconclusive(_) => "InconclusiveError",
            Error::Convergence(_) => "ConvergenceError",
            Error::NotProlongable(_) => "NotProlongable",
            Error::Window(_) => "WindowError",
            Error::Rarity(_) => "RarityError",
            Error::MaximalPath(_) => "MaximalPathError",
            Error::Io(_) => "IoError",
        }
    }

    /// True for failures of a numeric procedure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Convergence(_) | Error::Singular { .. } | Error::Primitivity(_) | Error::Inconclusive(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
