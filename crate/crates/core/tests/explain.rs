use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;
use salesopt_core::explain::grouping::{group_feature, group_features};
use salesopt_core::explain::narrative::{build_insights, build_prompt, ValueChange};
use salesopt_core::explain::{
    generate_narrative, render_template, AlertKind, DeterministicMock, FeatureMapping, ImportanceRecord, Slots,
    TextGenClient,
};
use salesopt_core::{AccountId, ActionType};

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rec(name: &str, weight: f64, value: f64) -> ImportanceRecord {
    ImportanceRecord { feature_name: name.into(), weight, value, account_id: AccountId(7) }
}

#[test]
fn templates_match_golden_files() {
    let low = Slots { d: Some(30), product: Some("P".into()), y: Some(40.0), delta_y: Some(-15.0) };
    let upsell = Slots { d: Some(45), delta_y: Some(5000.0), ..Slots::default() };
    let churn = Slots { d: Some(10), ..Slots::default() };
    let cases = [
        (AlertKind::LowEngagement, low, "low_engagement.txt"),
        (AlertKind::UpsellFlag, upsell, "upsell_flag.txt"),
        (AlertKind::ChurnFlag, churn, "churn_flag.txt"),
    ];
    for (kind, slots, file) in cases {
        let text = render_template(kind, &slots).unwrap() + "\n";
        assert_eq!(text.as_bytes(), golden(file).as_bytes(), "{file}");
    }
}

#[test]
fn grouping_table_matches_golden() {
    let names = ["MetricA_l1m", "MetricA_l2m_l1m", "MetricA_l3m", "MetricB_l1m"];
    let mut out = String::from("feature_name\tsuper_name\tultra_name\n");
    for g in group_features(&names, &FeatureMapping::default()) {
        assert!(g.parsed);
        out.push_str(&format!("{}\t{}\t{}\n", g.feature_name, g.super_name, g.ultra_name));
    }
    assert_eq!(out.as_bytes(), golden("grouping.tsv").as_bytes());
}

#[test]
fn unknown_suffix_passes_through_flagged() {
    let g = group_feature("SeatCount", &FeatureMapping::default());
    assert!(!g.parsed);
    assert_eq!(g.ultra_name, "SeatCount");
    assert_eq!(g.months, None);
}

fn fixture() -> (Vec<ImportanceRecord>, BTreeMap<String, ValueChange>) {
    let records = vec![rec("MetricA_l1m", 0.05, 85.0), rec("MetricC_l12m", 0.072, 24.0), rec("MetricA_l3m", -0.01, 72.0)];
    let values = BTreeMap::from([
        ("MetricC_l12m".to_string(), ValueChange { previous: Some(18.0), current: 24.0 }),
        ("MetricA_l1m".to_string(), ValueChange { previous: Some(78.0), current: 85.0 }),
        ("MetricA_l3m".to_string(), ValueChange { previous: Some(70.0), current: 72.0 }),
    ]);
    (records, values)
}

#[test]
fn narrative_mock_matches_golden() {
    let (records, values) = fixture();
    let names: Vec<&str> = records.iter().map(|r| r.feature_name.as_str()).collect();
    let groups = group_features(&names, &FeatureMapping::default());
    let n = generate_narrative(&records, &groups, &values, ActionType::PromoteUpsell, &DeterministicMock);
    assert!(!n.fell_back);
    assert_eq!(n.insights.len(), 2);
    assert_eq!(n.insights[0].ultra_name, "Metric C");
    assert_eq!(n.insights[1].members.len(), 2);
    assert!(n.text.contains("(+33%)"));
    assert_eq!((n.text + "\n").as_bytes(), golden("narrative_upsell.txt").as_bytes());
}

#[test]
fn mapping_expands_shorthand() {
    let mapping = FeatureMapping::new([("InMail", "Messages sent")]).unwrap();
    let g = group_feature("InMail_l3m", &mapping);
    assert_eq!(g.super_name, "Messages sent in the last 3 months");
    assert_eq!(g.ultra_name, "Messages sent");
}

fn name_strategy() -> impl Strategy<Value = String> {
    (0u8..6, prop::sample::select(vec![1u32, 2, 3, 6, 12])).prop_map(|(m, w)| format!("Metric{}_l{w}m", (b'A' + m) as char))
}

proptest! {
    #[test]
    fn one_insight_per_ultra_name_in_weight_order(
        items in prop::collection::vec((name_strategy(), 0.001f64..1.0, -50.0f64..50.0), 1..12)
    ) {
        let mut seen = std::collections::BTreeSet::new();
        let records: Vec<ImportanceRecord> = items
            .iter()
            .filter(|(n, _, _)| seen.insert(n.clone()))
            .map(|(n, w, v)| rec(n, *w, *v))
            .collect();
        let names: Vec<&str> = records.iter().map(|r| r.feature_name.as_str()).collect();
        let groups = group_features(&names, &FeatureMapping::default());
        let insights = build_insights(&records, &groups, &BTreeMap::new());
        let distinct: std::collections::BTreeSet<&str> = groups.iter().map(|g| g.ultra_name.as_str()).collect();
        prop_assert_eq!(insights.len(), distinct.len());
        for pair in insights.windows(2) {
            prop_assert!(
                pair[0].aggregate_weight > pair[1].aggregate_weight
                    || (pair[0].aggregate_weight == pair[1].aggregate_weight && pair[0].ultra_name < pair[1].ultra_name)
            );
        }
        let total: f64 = records.iter().map(|r| r.weight.abs()).sum();
        let agg: f64 = insights.iter().map(|i| i.aggregate_weight).sum();
        prop_assert!((total - agg).abs() < 1e-12);

        let prompt = build_prompt(&insights, ActionType::BoostEngagement);
        let text = DeterministicMock.generate(&prompt).unwrap();
        prop_assert_eq!(text.lines().count(), insights.len() + 1);
        for (i, ins) in insights.iter().enumerate() {
            let line = text.lines().nth(i + 1).unwrap();
            let prefix = format!("{}. ", i + 1);
            prop_assert!(line.starts_with(&prefix));
            prop_assert!(line.contains(&ins.ultra_name) || line.contains(&ins.members[0].super_name));
        }
    }
}
