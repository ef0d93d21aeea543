//! Explanations: alert templates, feature mapping and thresholds, suffix
//! grouping of feature names, local importance, and narrative generation
//! through a pluggable text-generation client.

pub mod grouping;
pub mod importance;
pub mod narrative;
pub mod templates;
pub mod thresholds;

use alloc::string::String;

pub use grouping::{group_features, FeatureGroup};
pub use importance::{instance_importance, ImportanceConfig, ImportanceRecord};
pub use narrative::{generate_narrative, DeterministicMock, Insight, Narrative, TextGenClient, TextGenError};
pub use templates::{format_number, render_template, AlertKind, Slots};
pub use thresholds::{apply_thresholds, Comparator, FeatureMapping, ModelKind, ThresholdRule, ThresholdSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("missing template slot `{0}`")]
    MissingSlot(&'static str),
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("rule references unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("no model output for feature `{0}`")]
    MissingOutput(String),
    #[error("feature and value lengths differ")]
    LengthMismatch,
}
