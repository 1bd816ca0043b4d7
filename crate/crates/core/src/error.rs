use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage that produced an error, used for stage-named diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Generation,
    Ingestion,
    Dedup,
    Fit,
    Metrics,
    Bootstrap,
    GroupComparison,
    Emit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Generation => "generation",
            Stage::Ingestion => "ingestion",
            Stage::Dedup => "dedup",
            Stage::Fit => "fit",
            Stage::Metrics => "metrics",
            Stage::Bootstrap => "bootstrap",
            Stage::GroupComparison => "group comparison",
            Stage::Emit => "emit",
        };
        f.write_str(name)
    }
}

/// Coarse classification of failures; the CLI maps these onto exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
    Comparison,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("model document syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {}", join_violations(.0))]
    InvalidModel(Vec<Violation>),
    #[error("unknown preset `{0}` (expected study1 or study2)")]
    UnknownPreset(String),

    #[error("panel CSV row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("panel CSV header: {0}")]
    Header(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("panel is empty")]
    EmptyPanel,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("item `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("singular predictor matrix while regressing `{0}` (perfectly collinear latent scores)")]
    Singular(String),
    #[error("PLS estimation did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("`{0}` is exogenous; R² is only defined for endogenous constructs")]
    Exogenous(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("removing low-loading items would leave construct `{0}` without indicators")]
    EmptyConstruct(String),
    #[error("{failed} of {total} bootstrap resamples failed to produce an estimate (limit is 10%)")]
    BootstrapFailures { failed: usize, total: usize },
    #[error("planted model: {0}")]
    Planted(String),

    #[error("item `{0}` has no statement text; the prompt cannot be rendered")]
    MissingStatement(String),
    #[error("no LLM credential; set CONSTRUCT_FORGE_API_KEY")]
    MissingCredential,
    #[error("LLM endpoint rejected the credential (HTTP {0})")]
    Auth(u16),
    #[error("LLM transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("LLM returned an empty completion")]
    EmptyCompletion,
    #[error("no parsable table rows in response ({rejected} candidate line(s) rejected)")]
    NoRows { rejected: usize },
    #[error("transcript: {0}")]
    Transcript(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{offenders} cell(s) outside tolerance; first: {first}")]
    ComparisonFailed { offenders: usize, first: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Stage { source, .. } => source.class(),
            Error::Syntax { .. }
            | Error::InvalidModel(_)
            | Error::UnknownPreset(_)
            | Error::InvalidArgument(_)
            | Error::MissingStatement(_)
            | Error::MissingCredential
            | Error::Auth(_)
            | Error::Json(_) => ErrorClass::Usage,
            Error::NotConverged(_)
            | Error::Singular(_)
            | Error::BootstrapFailures { .. }
            | Error::Planted(_)
            | Error::Degenerate(_) => ErrorClass::Numerical,
            Error::SchemaMismatch(_) | Error::ComparisonFailed { .. } => ErrorClass::Comparison,
            _ => ErrorClass::Data,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
