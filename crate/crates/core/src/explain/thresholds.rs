//! Human-readable feature names and per-model threshold rules.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ExplainError;

/// Feature name → human-readable expression.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapping {
    rows: BTreeMap<String, String>,
}

impl FeatureMapping {
    pub fn new<I, A, B>(rows: I) -> Result<Self, ExplainError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (name, expr) in rows {
            let name = name.into();
            if map.contains_key(&name) {
                return Err(ExplainError::DuplicateFeature(name));
            }
            map.insert(name, expr.into());
        }
        Ok(Self { rows: map })
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.rows.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    TreatmentModel,
    ControlModel,
    Forecaster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Gt,
    Le,
    Ge,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Lt => value < bound,
            Comparator::Gt => value > bound,
            Comparator::Le => value <= bound,
            Comparator::Ge => value >= bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub feature: String,
    pub model: ModelKind,
    pub comparator: Comparator,
    pub bound: f64,
}

/// Rules checked against a known feature list when loaded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub rules: Vec<ThresholdRule>,
}

impl ThresholdSet {
    pub fn new(rules: Vec<ThresholdRule>, known_features: &[String]) -> Result<Self, ExplainError> {
        let known: BTreeSet<&str> = known_features.iter().map(String::as_str).collect();
        if let Some(r) = rules.iter().find(|r| !known.contains(r.feature.as_str())) {
            return Err(ExplainError::UnknownFeature(r.feature.clone()));
        }
        Ok(Self { rules })
    }
}

/// Rules whose comparison holds for the given per-(feature, model) outputs.
pub fn apply_thresholds<'a>(
    rules: &'a [ThresholdRule],
    outputs: &BTreeMap<(String, ModelKind), f64>,
) -> Result<Vec<&'a ThresholdRule>, ExplainError> {
    let mut fired = Vec::new();
    for r in rules {
        let v = outputs.get(&(r.feature.clone(), r.model)).ok_or_else(|| ExplainError::MissingOutput(r.feature.clone()))?;
        if r.comparator.holds(*v, r.bound) {
            fired.push(r);
        }
    }
    Ok(fired)
}
