use proptest::prelude::*;
use rand::Rng;
use salesopt_core::datagen::{generate_panel, PanelSpec, RealizedOutcome};
use salesopt_core::domain::{Group, Period};
use salesopt_core::evalharness::{
    cem_match, default_cuts, did_estimate, net_ratio, placebo_pretest, precision_metrics, smd, CemUnit, Coarsening,
    EvalError,
};
use salesopt_core::rng::seeded;
use salesopt_core::{ActionType, PanelObservation};

fn obs(unit_id: u64, group: Group, time: i32, outcome: f64) -> PanelObservation {
    let period = if time < 0 { Period::Pre } else { Period::Post };
    PanelObservation { unit_id, group, time, period, outcome, covariates: vec![0.0] }
}

fn hand_panel() -> Vec<PanelObservation> {
    // Two units per group whose cell means are treat 10 -> 14, ctrl 8 -> 9.
    vec![
        obs(1, Group::Treat, -1, 9.0),
        obs(1, Group::Treat, 0, 13.0),
        obs(2, Group::Treat, -1, 11.0),
        obs(2, Group::Treat, 0, 15.0),
        obs(3, Group::Ctrl, -1, 7.5),
        obs(3, Group::Ctrl, 0, 8.0),
        obs(4, Group::Ctrl, -1, 8.5),
        obs(4, Group::Ctrl, 0, 10.0),
    ]
}

#[test]
fn hand_panel_is_exact() {
    let r = did_estimate(&hand_panel()).unwrap();
    assert_eq!(r.tau_hat, 3.0);
    assert_eq!(r.rte, 3.0);
    assert_eq!(r.counts, [2, 2, 2, 2]);
}

#[test]
fn noiseless_injected_effect_is_recovered() {
    let spec = PanelSpec { noise_sd: 0.0, ..PanelSpec::default() };
    let r = did_estimate(&generate_panel(&spec, 3, 2.0)).unwrap();
    assert!((r.tau_hat - 2.0).abs() < 1e-12, "{}", r.tau_hat);
}

#[test]
fn noiseless_placebo_cut_is_zero() {
    let spec = PanelSpec { noise_sd: 0.0, ..PanelSpec::default() };
    let panel = generate_panel(&spec, 4, 1.0);
    let rep = placebo_pretest(&panel, &[-3], 0.05).unwrap();
    assert!(rep.results[0].tau_hat.abs() < 1e-12);
    assert!(rep.parallel_trends_plausible);
}

#[test]
fn zero_effect_stays_within_three_standard_errors() {
    let r = did_estimate(&generate_panel(&PanelSpec::default(), 11, 0.0)).unwrap();
    let se = r.inference.unwrap().std_error;
    assert!(r.tau_hat.abs() < 3.0 * se);
}

#[test]
fn injected_effect_coverage() {
    let spec = PanelSpec::default();
    let covered = (0..100u64)
        .filter(|s| did_estimate(&generate_panel(&spec, 500 + s, 2.0)).unwrap().inference.unwrap().covers(2.0))
        .count();
    assert!(covered >= 90, "{covered}/100");
}

#[test]
fn placebo_size_and_power() {
    let spec = PanelSpec::default();
    let quiet = (0..100u64)
        .filter(|s| {
            let p = generate_panel(&spec, 900 + s, 0.5);
            placebo_pretest(&p, &default_cuts(&p), 0.05).unwrap().parallel_trends_plausible
        })
        .count();
    assert!(quiet >= 95, "{quiet}/100");

    let diverging = PanelSpec { divergence: 0.05, ..PanelSpec::default() };
    let p = generate_panel(&diverging, 7, 0.0);
    assert!(!placebo_pretest(&p, &default_cuts(&p), 0.05).unwrap().parallel_trends_plausible);
}

#[test]
fn placebo_rejects_bad_cuts() {
    let p = generate_panel(&PanelSpec::default(), 1, 0.0);
    assert!(matches!(placebo_pretest(&p, &[], 0.05), Err(EvalError::NoCuts)));
    assert!(matches!(placebo_pretest(&p, &[0], 0.05), Err(EvalError::CutOutOfRange(0))));
    let short = PanelSpec { pre_periods: 1, ..PanelSpec::default() };
    assert!(matches!(
        placebo_pretest(&generate_panel(&short, 1, 0.0), &[-1], 0.05),
        Err(EvalError::InsufficientPrePeriod(_))
    ));
}

#[test]
fn empty_cell_and_flat_control_are_errors() {
    let panel: Vec<_> = hand_panel().into_iter().filter(|o| o.group == Group::Treat).collect();
    assert!(matches!(did_estimate(&panel), Err(EvalError::EmptyCell(_))));
    let mut flat = hand_panel();
    flat[5].outcome = 7.5;
    flat[7].outcome = 8.5;
    assert!(matches!(did_estimate(&flat), Err(EvalError::ZeroControlTrend)));
}

fn small_panel() -> impl Strategy<Value = Vec<PanelObservation>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 6..20).prop_map(|units| {
        let mut out = Vec::new();
        for (u, (pre, post)) in units.iter().enumerate() {
            let g = if u % 2 == 0 { Group::Treat } else { Group::Ctrl };
            out.push(obs(u as u64, g, -1, *pre));
            out.push(obs(u as u64, g, 0, *post + 0.01 * u as f64));
        }
        out
    })
}

proptest! {
    #[test]
    fn did_ignores_row_order(panel in small_panel(), seed in any::<u64>()) {
        let mut shuffled = panel.clone();
        let mut rng = seeded(seed, 0);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        if let Ok(a) = did_estimate(&panel) {
            let b = did_estimate(&shuffled).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn additive_shift_leaves_estimate(panel in small_panel(), c in -100.0f64..100.0) {
        let shifted: Vec<_> = panel.iter().cloned().map(|mut o| { o.outcome += c; o }).collect();
        if let (Ok(a), Ok(b)) = (did_estimate(&panel), did_estimate(&shifted)) {
            let tol = 1e-9 * (1.0 + c.abs());
            prop_assert!((a.tau_hat - b.tau_hat).abs() < tol);
        }
    }

    #[test]
    fn scaling_leaves_rte(panel in small_panel(), c in 0.1f64..50.0) {
        let scaled: Vec<_> = panel.iter().cloned().map(|mut o| { o.outcome *= c; o }).collect();
        if let (Ok(a), Ok(b)) = (did_estimate(&panel), did_estimate(&scaled)) {
            prop_assert!((a.tau_hat * c - b.tau_hat).abs() < 1e-9 * (1.0 + b.tau_hat.abs()));
            prop_assert!((a.rte - b.rte).abs() < 1e-7 * (1.0 + a.rte.abs()));
        }
    }

    #[test]
    fn cem_balances_the_coarsened_covariate(
        units in prop::collection::vec((any::<bool>(), 0.0f64..1.0, 0.0f64..1.0), 2..80),
        bins in 1usize..6,
    ) {
        let units: Vec<CemUnit> = units
            .iter()
            .enumerate()
            .map(|(i, &(t, a, b))| CemUnit { id: i as u64, treated: t, covariates: vec![a, b] })
            .collect();
        let c = Coarsening::uniform(2, 0.0, 1.0, bins).unwrap();
        let r = cem_match(&units, &c).unwrap();
        prop_assume!(!r.empty);
        let mut w = vec![0.0; units.len()];
        for m in r.treated.iter().chain(&r.control) {
            w[m.id as usize] = m.weight;
        }
        // After reweighting, the stratum distribution of the controls
        // matches the treated one, so the binned covariate is balanced.
        for dim in 0..2 {
            let after = smd(&units, &w, |u| c.bin(dim, u.covariates[dim]).unwrap() as f64);
            prop_assert!(after.abs() < 1e-9, "after {after}");
        }
        let wt: f64 = r.control.iter().map(|m| m.weight).sum();
        prop_assert!((wt - r.control.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn cem_retains_the_overlapping_share() {
    let mut rng = seeded(21, 0);
    let n = 4000;
    let mut units = Vec::with_capacity(2 * n);
    for i in 0..n {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        units.push(CemUnit { id: i as u64, treated: true, covariates: x.to_vec() });
    }
    for i in 0..n {
        let x = [0.4 + rng.random::<f64>(), rng.random::<f64>()];
        units.push(CemUnit { id: (n + i) as u64, treated: false, covariates: x.to_vec() });
    }
    let edges = |hi: usize| (0..=hi).map(|k| k as f64 / 10.0).collect::<Vec<f64>>();
    let c = Coarsening::new(vec![edges(14), edges(10)]).unwrap();
    let r = cem_match(&units, &c).unwrap();
    let share = r.treated.len() as f64 / n as f64;
    assert!((share - 0.6).abs() <= 0.05, "treated retained {share}");
    let share = r.control.len() as f64 / n as f64;
    assert!((share - 0.6).abs() <= 0.05, "control retained {share}");
    assert!(r.smd_after[0].abs() < r.smd_before[0].abs());
}

#[test]
fn cem_on_panel_covariates_reduces_imbalance() {
    let panel = generate_panel(&PanelSpec::default(), 2, 0.0);
    let mut units: Vec<CemUnit> = panel
        .iter()
        .filter(|o| o.time == 0)
        .map(|o| CemUnit { id: o.unit_id, treated: o.group == Group::Treat, covariates: o.covariates.clone() })
        .collect();
    units.sort_by_key(|u| u.id);
    let r = cem_match(&units, &Coarsening::uniform(3, -3.5, 4.0, 5).unwrap()).unwrap();
    for (b, a) in r.smd_before.iter().zip(&r.smd_after) {
        assert!(a.abs() < b.abs(), "{a} vs {b}");
    }
}

#[test]
fn net_ratio_oracle() {
    assert_eq!(net_ratio(1200.0, 1000.0).unwrap(), 1.2);
    assert!(matches!(net_ratio(1.0, 0.0), Err(EvalError::NonPositiveTarget(_))));
}

fn outcome(closed_upsell: bool, churned: bool, retained: bool) -> RealizedOutcome {
    RealizedOutcome { upsell_closed: closed_upsell, churned_without_outreach: churned, retained_via_outreach: retained, bookings: 0.0 }
}

#[test]
fn precision_oracle() {
    let mut recs = Vec::new();
    for i in 0..10 {
        recs.push((ActionType::PromoteUpsell, outcome(i < 6, false, false)));
    }
    for i in 0..4 {
        recs.push((ActionType::PreventChurn, outcome(false, i == 0, i > 0 && i < 3)));
    }
    let m = precision_metrics(recs.iter().map(|(a, o)| (*a, o)));
    assert_eq!(m.p_ups, Some(0.6));
    assert_eq!(m.p_ch, Some(0.25));
    assert_eq!(m.p_rec, Some(0.5));
    assert_eq!(m.p_low, None);
}
