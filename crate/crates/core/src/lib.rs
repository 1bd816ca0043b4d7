//! Measurement-theory workbench: Likert respondent panels (ingested, synthetic
//! or LLM-generated), PLS path model estimation, reliability and validity
//! metrics, bootstrap inference and paper-style report tables.

pub mod error;
pub mod generate;
pub mod inference;
pub mod model;
pub mod panel;
pub mod pls;
pub mod psychometrics;
pub mod report;
mod stats;

pub use error::{Error, ErrorClass, Result, Stage};
pub use inference::{
    bootstrap, group_compare, welch_compare, BootstrapOptions, BootstrapResult, GroupComparison, GroupTest,
    PathInference,
};
pub use model::{
    builtin_model, parse_model, validate_model, Construct, DemographicField, DemographicKind, Item, ItemSet,
    LikertScale, ModelSpec, Preset, Role, StructuralPath, Validation, Violation,
};
pub use panel::{
    dedupe, demographics_table, ingest_csv, item_matrix, DedupKey, DedupReport, Panel, Provenance, RespondentRow,
};
pub use pls::{fit_matrix, fit_pls, FitOptions, FitResult, WeightingScheme};
