use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use salesopt_core::datagen::{BaselineSpec, GenConfig, SyntheticWorld};
use salesopt_core::linalg::Matrix;
use salesopt_core::uplift::{
    decile_spearman, fit_ridge, fit_uplift, propensity_fit, uplift_deciles, BaseSpec, LearnerKind, UpliftSpec,
};

/// Ridge with an unpenalized intercept via centering, solved by nalgebra.
fn ridge_oracle(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let n = rows.len();
    let p = rows[0].len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let means: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let a = xc.transpose() * &xc + DMatrix::identity(p, p) * lambda;
    let beta = a.cholesky().expect("spd").solve(&(xc.transpose() * yc));
    let intercept = ybar - means.iter().zip(beta.iter()).map(|(m, b)| m * b).sum::<f64>();
    (intercept, beta.iter().copied().collect())
}

proptest! {
    #[test]
    fn ridge_matches_normal_equations(
        data in prop::collection::vec((prop::collection::vec(-3.0f64..3.0, 3), -10.0f64..10.0), 12..60),
        lambda in 0.01f64..10.0,
    ) {
        let rows: Vec<Vec<f64>> = data.iter().map(|(x, _)| x.clone()).collect();
        let y: Vec<f64> = data.iter().map(|(_, y)| *y).collect();
        let m = fit_ridge(&Matrix::from_rows(&rows), &y, None, lambda);
        let (b0, beta) = ridge_oracle(&rows, &y, lambda);
        prop_assert!((m.intercept - b0).abs() < 1e-6 * (1.0 + b0.abs()));
        for (a, b) in m.coefs.iter().zip(&beta) {
            prop_assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()));
        }
    }
}

fn linear_world(seed: u64, n: usize, confounding: f64) -> SyntheticWorld {
    SyntheticWorld::new(GenConfig {
        seed,
        n_accounts: n,
        noise_sd: 0.0,
        confounding,
        baseline: BaselineSpec { curvature: 0.0, ..BaselineSpec::default() },
        ..GenConfig::default()
    })
    .unwrap()
}

#[test]
fn learners_match_true_ite_on_noiseless_linear_data() {
    for confounding in [0.0, 0.8] {
        let world = linear_world(5, 600, confounding);
        let (accounts, _) = world.generate_population();
        let a = world.assign_treatment(&accounts);
        let y = world.simulate_outcomes(&accounts, &a);
        let x = Matrix::from_rows(&accounts.iter().map(|acc| acc.x_u()).collect::<Vec<_>>());
        for kind in [LearnerKind::S, LearnerKind::T, LearnerKind::X, LearnerKind::DR] {
            let model = fit_uplift(&UpliftSpec::new(kind, BaseSpec::Ridge { lambda: 0.0 }), &x, &a, &y).unwrap();
            let worst = accounts
                .iter()
                .map(|acc| (model.predict_ite(&acc.x_u()) - acc.true_ite.unwrap()).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "{kind:?} confounding {confounding}: {worst:e}");
        }
    }
}

#[test]
fn true_scores_give_monotone_deciles() {
    let world = SyntheticWorld::new(GenConfig { seed: 9, n_accounts: 20_000, ..GenConfig::default() }).unwrap();
    let (accounts, _) = world.generate_population();
    let a = world.assign_treatment(&accounts);
    let y = world.simulate_outcomes(&accounts, &a);
    let scores: Vec<f64> = accounts.iter().map(|acc| acc.true_ite.unwrap()).collect();
    let table = uplift_deciles(&scores, &y, &a).unwrap();
    assert_eq!(table.len(), 10);
    assert!(decile_spearman(&table) >= 0.9);
}

#[test]
fn propensity_tracks_confounding() {
    let world = SyntheticWorld::new(GenConfig { seed: 3, n_accounts: 5000, confounding: 1.0, ..GenConfig::default() }).unwrap();
    let (accounts, _) = world.generate_population();
    let a = world.assign_treatment(&accounts);
    let rows: Vec<Vec<f64>> = accounts.iter().map(|acc| acc.x_u()).collect();
    let model = propensity_fit(&Matrix::from_rows(&rows), &a, 1.0).unwrap();
    let err = rows.iter().map(|x| (model.predict(x) - world.propensity(x)).abs()).sum::<f64>() / rows.len() as f64;
    assert!(err < 0.05, "mean abs propensity error {err}");
    assert!(rows.iter().all(|x| (0.01..=0.99).contains(&model.predict(x))));
}
