use proptest::prelude::*;
use salesopt_core::optimizer::{
    build_lp, eligibility_filter, match_and_rank, normalize_scores, recommend_action, solve_lp, weight,
    AssignmentMode, Combiner, LinearProgram, LpError, OptimizeError, OptimizerParams, Row, Sense, ServedLog,
};
use salesopt_core::{AccountId, ActionType, Rep, RepId, ScoredAccount};

fn scored(id: u64, d: i64, y_u_raw: f64, delta_e: Vec<f64>) -> ScoredAccount {
    let y_e_raw = delta_e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ScoredAccount { account_id: AccountId(id), d, y_u_raw, delta_e, y_e_raw, y_u: 0.0, y_e: 0.0 }
}

fn reps(m: usize) -> Vec<Rep> {
    (0..m).map(|j| Rep { id: RepId(j as u32 + 1), s: vec![0.0] }).collect()
}

fn feasible(lp: &LinearProgram, x: &[f64], tol: f64) -> bool {
    x.iter().zip(&lp.upper).all(|(&v, &u)| v >= -tol && v <= u + tol)
        && lp.rows.iter().all(|r| {
            let lhs: f64 = r.coefs.iter().map(|&(j, a)| a * x[j]).sum();
            match r.sense {
                Sense::Le => lhs <= r.rhs + tol,
                Sense::Ge => lhs >= r.rhs - tol,
                Sense::Eq => (lhs - r.rhs).abs() <= tol,
            }
        })
}

/// Best objective over all 0/1 points, by enumeration.
fn binary_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
        if feasible(lp, &x, 1e-12) {
            let v: f64 = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

fn assignment_program(c: &[f64], n: usize, m: usize, n_min: u32, n_max: u32, exact: bool) -> LinearProgram {
    let mut rows = Vec::new();
    for i in 0..n {
        let sense = if exact { Sense::Eq } else { Sense::Le };
        rows.push(Row { coefs: (0..m).map(|j| (i * m + j, 1.0)).collect(), sense, rhs: 1.0 });
    }
    for j in 0..m {
        let coefs: Vec<(usize, f64)> = (0..n).map(|i| (i * m + j, 1.0)).collect();
        rows.push(Row { coefs: coefs.clone(), sense: Sense::Le, rhs: f64::from(n_max) });
        if n_min > 0 {
            rows.push(Row { coefs, sense: Sense::Ge, rhs: f64::from(n_min) });
        }
    }
    LinearProgram { objective: c.to_vec(), upper: vec![1.0; n * m], rows }
}

fn instance() -> impl Strategy<Value = (usize, usize, Vec<f64>, u32, u32, bool)> {
    (1usize..=6, 1usize..=2)
        .prop_flat_map(|(n, m)| {
            (Just(n), Just(m), prop::collection::vec(-100.0f64..100.0, n * m), 0u32..=2, 0u32..=4, any::<bool>())
        })
        .prop_map(|(n, m, c, lo, extra, exact)| (n, m, c, lo, lo + extra, exact))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_bounds_binary_optimum((n, m, c, n_min, n_max, exact) in instance()) {
        let lp = assignment_program(&c, n, m, n_min, n_max, exact);
        let oracle = binary_optimum(&lp);
        match salesopt_core::optimizer::simplex::solve(&lp) {
            Ok(r) => {
                prop_assert!(feasible(&lp, &r.x, 1e-6));
                let v: f64 = c.iter().zip(&r.x).map(|(c, x)| c * x).sum();
                prop_assert!((v - r.objective).abs() < 1e-6);
                let best = oracle.expect("LP feasible but no binary point");
                prop_assert!(r.objective >= best - 1e-6);
                if r.x.iter().all(|&v| v.min((v - 1.0).abs()) < 1e-9) {
                    prop_assert!((r.objective - best).abs() < 1e-6);
                }
                // The assignment constraint matrix is totally unimodular.
                prop_assert!((r.objective - best).abs() < 1e-6);
            }
            Err(LpError::Infeasible { .. }) => prop_assert!(oracle.is_none()),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn pipeline_lp_is_feasible_and_ranked(
        raw in prop::collection::vec((0i64..365, -5000.0f64..5000.0, -20.0f64..20.0, -1.0f64..1.0), 1..=6),
        m in 1usize..=2,
        n_max in 1u32..=3,
    ) {
        let mut pool: Vec<ScoredAccount> =
            raw.iter().enumerate().map(|(i, &(d, u, a, b))| scored(i as u64, d, u, vec![a, b])).collect();
        normalize_scores(&mut pool);
        let p = OptimizerParams { n_max, ..OptimizerParams::default() };
        let lp = build_lp(&pool, &reps(m), &p).unwrap();
        let sol = solve_lp(&lp).unwrap();
        prop_assert!(feasible(&lp.program, &sol.assignment.entries, 1e-6));
        let best = binary_optimum(&lp.program).unwrap();
        prop_assert!((sol.objective - best).abs() < 1e-6);

        let pairs = match_and_rank(&sol.assignment, &lp.coefs);
        for (g, pair) in pairs.iter().enumerate() {
            prop_assert_eq!(pair.g_rank as usize, g + 1);
            prop_assert!(pair.a_value >= 0.5);
        }
        for w in pairs.windows(2) {
            prop_assert!(w[0].a_value >= w[1].a_value);
        }
        for rep in reps(m) {
            let ranks: Vec<u32> = pairs.iter().filter(|p| p.rep_id == rep.id).map(|p| p.r_rank).collect();
            prop_assert!(ranks.len() <= n_max as usize);
            prop_assert_eq!(ranks, (1..).take(ranks_len(&pairs, rep.id)).collect::<Vec<u32>>());
        }
        let mut ids: Vec<AccountId> = pairs.iter().map(|p| p.account_id).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), pairs.len());
    }

    #[test]
    fn normalized_scores_span_0_100(raw in prop::collection::vec((-1e4f64..1e4, -50.0f64..50.0), 1..40)) {
        let mut pool: Vec<ScoredAccount> =
            raw.iter().enumerate().map(|(i, &(u, e))| scored(i as u64, 30, u, vec![e])).collect();
        normalize_scores(&mut pool);
        for s in &pool {
            prop_assert!((0.0..=100.0).contains(&s.y_u) && (0.0..=100.0).contains(&s.y_e));
        }
        let distinct = raw.iter().any(|r| r.0 != raw[0].0);
        if distinct {
            prop_assert!(pool.iter().any(|s| s.y_u == 0.0) && pool.iter().any(|s| s.y_u == 100.0));
        }
    }

    #[test]
    fn weight_is_decreasing_for_negative_k(d1 in 0.0f64..400.0, d2 in 0.0f64..400.0, k in -1.0f64..-1e-3, d0 in 0.0f64..200.0) {
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(weight(lo, k, d0) >= weight(hi, k, d0));
        prop_assert_eq!(weight(d0, k, d0), 0.5);
    }

    #[test]
    fn cooldown_excludes_exactly_the_window(served_day in 0i64..100, today in 0i64..130, window in 0i64..30) {
        let mut log = ServedLog::new();
        log.record(AccountId(1), served_day);
        let mut s = scored(1, 10, 0.0, vec![1.0]);
        s.y_u = 100.0;
        let p = OptimizerParams { cooldown_days: window, ..OptimizerParams::default() };
        let kept = eligibility_filter(&[s], &log, &p, today).len() == 1;
        let blocked = today > served_day && today - served_day <= window;
        prop_assert_eq!(kept, !blocked);
    }
}

fn ranks_len(pairs: &[salesopt_core::optimizer::MatchedPair], rep: RepId) -> usize {
    pairs.iter().filter(|p| p.rep_id == rep).count()
}

#[test]
fn capacity_shortfall_is_reported() {
    let mut pool: Vec<ScoredAccount> = (0..3).map(|i| scored(i, 10, i as f64, vec![1.0])).collect();
    normalize_scores(&mut pool);
    let p = OptimizerParams { n_min: 2, ..OptimizerParams::default() };
    assert!(matches!(build_lp(&pool, &reps(2), &p), Err(OptimizeError::Capacity { .. })));
    let p = OptimizerParams { n_max: 1, assignment_mode: AssignmentMode::ExactlyOne, ..OptimizerParams::default() };
    assert!(matches!(build_lp(&pool, &reps(2), &p), Err(OptimizeError::Capacity { .. })));
}

#[test]
fn and_combiner_needs_both_scores() {
    let mut s = scored(1, 10, 0.0, vec![1.0]);
    s.y_u = 90.0;
    s.y_e = 10.0;
    let or = OptimizerParams::default();
    let and = OptimizerParams { combiner: Combiner::And, ..OptimizerParams::default() };
    assert_eq!(eligibility_filter(std::slice::from_ref(&s), &ServedLog::new(), &or, 0).len(), 1);
    assert!(eligibility_filter(&[s], &ServedLog::new(), &and, 0).is_empty());
}

#[test]
fn action_rule_truth_table() {
    let p = OptimizerParams::default();
    let at_center = |y_u: f64, y_e: f64, raw: f64, delta: Vec<f64>| {
        let mut s = scored(1, 90, raw, delta);
        s.y_u = y_u;
        s.y_e = y_e;
        recommend_action(&s, &p)
    };
    // w = 0.5 at d = d0, so M > E iff y_u > y_e.
    assert_eq!(at_center(80.0, 20.0, 5000.0, vec![1.0, 2.0]), ActionType::PromoteUpsell);
    assert_eq!(at_center(80.0, 20.0, -1000.0, vec![1.0, 2.0]), ActionType::PreventChurn);
    assert_eq!(at_center(20.0, 80.0, 5000.0, vec![3.0, -3.0]), ActionType::BoostEngagement);
    assert_eq!(at_center(20.0, 80.0, -1000.0, vec![1.0, -3.0]), ActionType::PromoteUpsell);
    assert_eq!(at_center(50.0, 50.0, -1000.0, vec![1.0, -3.0]), ActionType::PromoteUpsell);
    assert_eq!(at_center(80.0, 20.0, 0.0, vec![1.0]), ActionType::PreventChurn);
}
