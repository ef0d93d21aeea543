//! Suffix-based grouping of feature names.
//!
//! Names follow `<metric>_<window>` where each window token is `l<n>m`
//! ("last n months"). Chained windows such as `_l2m_l1m` resolve to the
//! final one. The metric part is expanded through a [`FeatureMapping`] when
//! it has an entry, otherwise CamelCase is split into words.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use serde::{Deserialize, Serialize};

use super::FeatureMapping;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub feature_name: String,
    /// Meaning including the time window.
    pub super_name: String,
    /// Window-free category.
    pub ultra_name: String,
    /// Window in months, when the suffix parsed.
    pub months: Option<u32>,
    pub parsed: bool,
}

fn window(token: &str) -> Option<u32> {
    let digits = token.strip_prefix('l')?.strip_suffix('m')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|&n| n > 0)
}

/// "MetricA" → "Metric A", "NPSScore" → "NPS Score".
pub fn split_camel(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 4);
    for (i, &c) in chars.iter().enumerate() {
        if i > 0 && c.is_uppercase() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                out.push(' ');
            }
        }
        out.push(c);
    }
    out
}

pub fn group_feature(name: &str, mapping: &FeatureMapping) -> FeatureGroup {
    let tokens: Vec<&str> = name.split('_').collect();
    let mut cut = tokens.len();
    while cut > 1 && window(tokens[cut - 1]).is_some() {
        cut -= 1;
    }
    if cut == tokens.len() {
        log::debug!("feature `{name}` has no window suffix; left ungrouped");
        return FeatureGroup {
            feature_name: name.into(),
            super_name: name.into(),
            ultra_name: mapping.get(name).map_or_else(|| name.into(), String::from),
            months: None,
            parsed: false,
        };
    }
    let months = window(tokens[tokens.len() - 1]).expect("suffix checked above");
    let metric = tokens[..cut].join("_");
    let meaning = mapping.get(&metric).map_or_else(|| split_camel(&metric), String::from);
    let super_name = if months == 1 {
        format!("{meaning} in the last month")
    } else {
        format!("{meaning} in the last {months} months")
    };
    FeatureGroup { feature_name: name.into(), super_name, ultra_name: meaning, months: Some(months), parsed: true }
}

pub fn group_features<S: AsRef<str>>(names: &[S], mapping: &FeatureMapping) -> Vec<FeatureGroup> {
    names.iter().map(|n| group_feature(n.as_ref(), mapping)).collect()
}

/// Default feature names for the synthetic population: account features
/// get distinct metrics over a fixed window.
pub fn synthetic_feature_names(dim: usize) -> Vec<String> {
    let windows = [1, 3, 12];
    let mut names = vec![];
    for j in 0..dim {
        let metric = (b'A' + (j % 26) as u8) as char;
        names.push(format!("Metric{metric}_l{}m", windows[j % windows.len()]));
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camel_split() {
        assert_eq!(split_camel("MetricA"), "Metric A");
        assert_eq!(split_camel("NPSScore"), "NPS Score");
        assert_eq!(split_camel("seats"), "seats");
    }

    #[test]
    fn window_tokens() {
        assert_eq!(window("l1m"), Some(1));
        assert_eq!(window("l12m"), Some(12));
        assert_eq!(window("lm"), None);
        assert_eq!(window("l0m"), None);
        assert_eq!(window("x1m"), None);
    }

    #[test]
    fn mapping_overrides_camel_split() {
        let m = FeatureMapping::new([("producta", "Product A usage")]).unwrap();
        let g = group_feature("producta_l1m", &m);
        assert_eq!(g.super_name, "Product A usage in the last month");
        assert_eq!(g.ultra_name, "Product A usage");
    }

    #[test]
    fn bare_window_is_not_a_metric() {
        let g = group_feature("l3m", &FeatureMapping::default());
        assert!(!g.parsed);
    }
}
