//! Fixed-text alert templates.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::domain::ActionType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlertKind {
    LowEngagement,
    UpsellFlag,
    ChurnFlag,
}

impl AlertKind {
    pub fn for_action(action: ActionType) -> Self {
        match action {
            ActionType::BoostEngagement => AlertKind::LowEngagement,
            ActionType::PromoteUpsell => AlertKind::UpsellFlag,
            ActionType::PreventChurn => AlertKind::ChurnFlag,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Slots {
    /// Days to contract renewal.
    pub d: Option<i64>,
    pub product: Option<String>,
    /// Current usage.
    pub y: Option<f64>,
    /// Predicted change.
    pub delta_y: Option<f64>,
}

/// Two decimals at most, trailing zeros dropped, no negative zero.
pub fn format_number(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { String::from("0") } else { String::from(s) }
}

pub fn render_template(kind: AlertKind, slots: &Slots) -> Result<String, ExplainError> {
    let d = slots.d.ok_or(ExplainError::MissingSlot("d"))?;
    Ok(match kind {
        AlertKind::LowEngagement => {
            let product = slots.product.as_deref().ok_or(ExplainError::MissingSlot("product"))?;
            let y = slots.y.ok_or(ExplainError::MissingSlot("y"))?;
            let dy = slots.delta_y.ok_or(ExplainError::MissingSlot("delta_y"))?;
            format!(
                "RTCD = {d}. We recommend reaching out to the client to understand the low engagement in {product}. \
                 The current usage is {} and we are predicting a drop to {} over the next month.",
                format_number(y),
                format_number(dy)
            )
        }
        AlertKind::UpsellFlag => {
            let dy = slots.delta_y.ok_or(ExplainError::MissingSlot("delta_y"))?;
            format!(
                "RTCD = {d}. We recommend exploring add-on opportunities with this customer as we predict a near-term \
                 upsell opportunity worth {}.",
                format_number(dy)
            )
        }
        AlertKind::ChurnFlag => format!("RTCD = {d}. We recommend connecting with customers to assess churn risks."),
    })
}
