//! Ranked narrative insights.
//!
//! Importance records are joined with their feature groups and aggregated
//! per `ultra_name` (sum of absolute weights). The resulting insight list is
//! embedded in a prompt as a tab-separated block; [`DeterministicMock`]
//! renders text from that block alone, so the whole path runs offline and is
//! a pure function of the prompt.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use serde::{Deserialize, Serialize};

use super::grouping::group_feature;
use super::templates::format_number;
use super::{FeatureGroup, FeatureMapping, ImportanceRecord};
use crate::domain::ActionType;
use crate::math::round;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextGenError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    BadResponse(String),
}

/// Prompt in, generated text out.
pub trait TextGenClient {
    fn name(&self) -> &str;
    fn generate(&self, prompt: &str) -> Result<String, TextGenError>;
}

impl<T: TextGenClient + ?Sized> TextGenClient for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&self, prompt: &str) -> Result<String, TextGenError> {
        (**self).generate(prompt)
    }
}

/// Previous and current value of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueChange {
    pub previous: Option<f64>,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightMember {
    pub feature_name: String,
    pub super_name: String,
    pub months: Option<u32>,
    pub weight: f64,
    pub previous: Option<f64>,
    pub current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Insight {
    pub rank: usize,
    pub ultra_name: String,
    pub aggregate_weight: f64,
    /// Every member has zero weight.
    pub low_confidence: bool,
    pub members: Vec<InsightMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narrative {
    pub text: String,
    pub insights: Vec<Insight>,
    pub prompt: String,
    /// Client that produced `text`.
    pub source: String,
    /// The configured client failed and the mock answered instead.
    pub fell_back: bool,
}

/// Joins records with groups and builds the ranked insight list.
pub fn build_insights(
    importances: &[ImportanceRecord],
    groups: &[FeatureGroup],
    values: &BTreeMap<String, ValueChange>,
) -> Vec<Insight> {
    let by_name: BTreeMap<&str, &FeatureGroup> = groups.iter().map(|g| (g.feature_name.as_str(), g)).collect();
    let mut buckets: BTreeMap<String, Vec<InsightMember>> = BTreeMap::new();
    for r in importances {
        let g = by_name
            .get(r.feature_name.as_str())
            .map(|g| (*g).clone())
            .unwrap_or_else(|| group_feature(&r.feature_name, &FeatureMapping::default()));
        let v = values.get(&r.feature_name).copied().unwrap_or(ValueChange { previous: None, current: r.value });
        buckets.entry(g.ultra_name.clone()).or_default().push(InsightMember {
            feature_name: r.feature_name.clone(),
            super_name: g.super_name,
            months: g.months,
            weight: r.weight,
            previous: v.previous,
            current: v.current,
        });
    }
    let mut insights: Vec<Insight> = buckets
        .into_iter()
        .map(|(ultra_name, mut members)| {
            members.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.feature_name.cmp(&b.feature_name)));
            let aggregate_weight: f64 = members.iter().map(|m| m.weight.abs()).sum();
            Insight { rank: 0, ultra_name, aggregate_weight, low_confidence: aggregate_weight == 0.0, members }
        })
        .collect();
    insights.sort_by(|a, b| {
        a.low_confidence
            .cmp(&b.low_confidence)
            .then(b.aggregate_weight.total_cmp(&a.aggregate_weight))
            .then(a.ultra_name.cmp(&b.ultra_name))
    });
    for (i, ins) in insights.iter_mut().enumerate() {
        ins.rank = i + 1;
    }
    insights
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v}"))
}

pub fn build_prompt(insights: &[Insight], action: ActionType) -> String {
    let mut p = String::new();
    p.push_str("You explain sales recommendations to account executives.\n");
    p.push_str(&format!("Recommended action: {}\n", action.label()));
    p.push_str("Write one insight per category below, in the order given. ");
    p.push_str("Combine related metrics of the same category into one insight. ");
    p.push_str("Use the numbers exactly as given and state the percent change.\n");
    p.push_str("BEGIN INSIGHTS\n");
    for ins in insights {
        let conf = if ins.low_confidence { "low" } else { "normal" };
        p.push_str(&format!("insight\t{}\t{}\t{}\t{}\n", ins.rank, clean(&ins.ultra_name), ins.aggregate_weight, conf));
        for m in &ins.members {
            let months = m.months.map_or_else(|| "-".to_string(), |n| n.to_string());
            p.push_str(&format!(
                "member\t{}\t{}\t{}\t{}\t{}\n",
                clean(&m.super_name),
                months,
                opt_num(m.previous),
                m.current,
                m.weight
            ));
        }
    }
    p.push_str("END INSIGHTS\n");
    p
}

/// Signed whole-number percent change, e.g. "+33%"; `None` when the base is 0.
pub fn percent_change(previous: f64, current: f64) -> Option<String> {
    if previous == 0.0 {
        return None;
    }
    let pct = round((current - previous) / previous.abs() * 100.0);
    Some(if pct > 0.0 {
        format!("+{pct}%")
    } else if pct < 0.0 {
        format!("{pct}%")
    } else {
        String::from("0%")
    })
}

/// Renders the insight block of a prompt with a fixed sentence pattern.
#[derive(Debug, Clone, Copy, Default)]
pub struct DeterministicMock;

struct ParsedMember {
    super_name: String,
    months: Option<u32>,
    previous: Option<f64>,
    current: f64,
}

struct ParsedInsight {
    ultra: String,
    low: bool,
    members: Vec<ParsedMember>,
}

fn change_phrase(previous: Option<f64>, current: f64) -> String {
    match previous {
        None => format!("is {}", format_number(current)),
        Some(p) if p == current => format!("was unchanged at {}", format_number(current)),
        Some(p) => {
            let verb = if current > p { "increased" } else { "decreased" };
            let pct = percent_change(p, current).map_or_else(String::new, |s| format!(" ({s})"));
            format!("{verb} from {} to {}{pct}", format_number(p), format_number(current))
        }
    }
}

fn lead_sentence(ultra: &str, m: &ParsedMember) -> String {
    match (m.months, m.previous) {
        (Some(1), Some(_)) => format!("In the past month, {ultra} {}.", change_phrase(m.previous, m.current)),
        (Some(n), Some(_)) => format!("In the past {n} months, {ultra} {}.", change_phrase(m.previous, m.current)),
        _ => format!("{} {}.", m.super_name, change_phrase(m.previous, m.current)),
    }
}

impl DeterministicMock {
    fn parse(prompt: &str) -> Result<(String, Vec<ParsedInsight>), TextGenError> {
        let bad = |what: &str| TextGenError::BadResponse(format!("mock cannot parse prompt: {what}"));
        let action = prompt
            .lines()
            .find_map(|l| l.strip_prefix("Recommended action: "))
            .ok_or_else(|| bad("no action line"))?
            .to_string();
        let mut inside = false;
        let mut out: Vec<ParsedInsight> = Vec::new();
        for line in prompt.lines() {
            match line {
                "BEGIN INSIGHTS" => inside = true,
                "END INSIGHTS" => inside = false,
                _ if inside => {
                    let f: Vec<&str> = line.split('\t').collect();
                    match f.first().copied() {
                        Some("insight") if f.len() == 5 => {
                            out.push(ParsedInsight { ultra: f[2].to_string(), low: f[4] == "low", members: vec![] })
                        }
                        Some("member") if f.len() == 6 => {
                            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("number"));
                            let member = ParsedMember {
                                super_name: f[1].to_string(),
                                months: f[2].parse().ok(),
                                previous: if f[3] == "-" { None } else { Some(num(f[3])?) },
                                current: num(f[4])?,
                            };
                            out.last_mut().ok_or_else(|| bad("member before insight"))?.members.push(member);
                        }
                        _ => return Err(bad("unknown line")),
                    }
                }
                _ => {}
            }
        }
        Ok((action, out))
    }
}

impl TextGenClient for DeterministicMock {
    fn name(&self) -> &str {
        "mock"
    }

    fn generate(&self, prompt: &str) -> Result<String, TextGenError> {
        let (action, insights) = Self::parse(prompt)?;
        let mut text = format!("This account is likely a good candidate to {action}. Its likelihood is driven by:");
        for (i, ins) in insights.iter().enumerate() {
            let Some(lead) = ins.members.first() else { continue };
            let mut line = lead_sentence(&ins.ultra, lead);
            let related: Vec<String> =
                ins.members[1..].iter().map(|m| format!("{} {}", m.super_name, change_phrase(m.previous, m.current))).collect();
            if !related.is_empty() {
                line.push_str(" Related: ");
                line.push_str(&related.join("; "));
                line.push('.');
            }
            if ins.low {
                line.push_str(" (low confidence)");
            }
            text.push_str(&format!("\n{}. {line}", i + 1));
        }
        Ok(text)
    }
}

/// Builds the prompt, asks `client`, and falls back to the mock on failure.
pub fn generate_narrative(
    importances: &[ImportanceRecord],
    groups: &[FeatureGroup],
    values: &BTreeMap<String, ValueChange>,
    action: ActionType,
    client: &dyn TextGenClient,
) -> Narrative {
    let insights = build_insights(importances, groups, values);
    let prompt = build_prompt(&insights, action);
    let (text, source, fell_back) = match client.generate(&prompt) {
        Ok(t) => (t, client.name().to_string(), false),
        Err(e) => {
            log::warn!("text generation via {} failed ({e}); using mock", client.name());
            let t = DeterministicMock.generate(&prompt).unwrap_or_default();
            (t, DeterministicMock.name().to_string(), true)
        }
    };
    Narrative { text, insights, prompt, source, fell_back }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AccountId;

    fn rec(name: &str, weight: f64, value: f64) -> ImportanceRecord {
        ImportanceRecord { feature_name: name.into(), weight, value, account_id: AccountId(1) }
    }

    #[test]
    fn percent_formatting() {
        assert_eq!(percent_change(18.0, 24.0).as_deref(), Some("+33%"));
        assert_eq!(percent_change(100.0, 93.0).as_deref(), Some("-7%"));
        assert_eq!(percent_change(10.0, 10.0).as_deref(), Some("0%"));
        assert_eq!(percent_change(0.0, 3.0), None);
    }

    #[test]
    fn mock_is_pure() {
        let ins = build_insights(&[rec("MetricC_l12m", 0.072, 24.0)], &[], &BTreeMap::new());
        let p = build_prompt(&ins, ActionType::PromoteUpsell);
        assert_eq!(DeterministicMock.generate(&p), DeterministicMock.generate(&p));
        assert!(DeterministicMock.generate("nothing here").is_err());
    }

    struct Failing;
    impl TextGenClient for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn generate(&self, _: &str) -> Result<String, TextGenError> {
            Err(TextGenError::Transport("down".into()))
        }
    }

    #[test]
    fn failure_falls_back_to_mock() {
        let n = generate_narrative(&[rec("MetricA_l1m", 0.5, 1.0)], &[], &BTreeMap::new(), ActionType::PreventChurn, &Failing);
        assert!(n.fell_back);
        assert_eq!(n.source, "mock");
        assert!(n.text.starts_with("This account is likely a good candidate to Prevent Churn."));
    }
}
