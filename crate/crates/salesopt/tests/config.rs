use salesopt::config::{Config, ConfigError, ExplorationMode};
use salesopt_core::bandit::Exploration;

#[test]
fn empty_file_gives_defaults() {
    assert_eq!(Config::parse("").unwrap(), Config::default());
}

#[test]
fn dotted_keys_and_tables_are_equivalent() {
    let a = Config::parse("optimizer.k = -0.1\nbandit.mode = \"ucb\"\n").unwrap();
    let b = Config::parse("[optimizer]\nk = -0.1\n[bandit]\nmode = \"ucb\"\n").unwrap();
    assert_eq!(a, b);
    assert_eq!(a.optimizer.k, -0.1);
    assert_eq!(a.bandit.mode, ExplorationMode::Ucb);
    assert!(matches!(a.bandit_params().exploration, Exploration::Ucb { gamma } if gamma == 0.1));
}

#[test]
fn unknown_keys_and_sections_are_rejected() {
    assert!(matches!(Config::parse("optimizer.kk = 1.0"), Err(ConfigError::Parse(_))));
    assert!(matches!(Config::parse("[nope]\nx = 1"), Err(ConfigError::Parse(_))));
    assert!(matches!(Config::parse("[optimizer.inner]\nk = 1.0"), Err(ConfigError::Parse(_))));
}

#[test]
fn invalid_values_are_rejected() {
    assert!(matches!(Config::parse("optimizer.n_min = 9\noptimizer.n_max = 2"), Err(ConfigError::Invalid(_))));
    assert!(matches!(Config::parse("generator.treatment_share = 1.5"), Err(ConfigError::Invalid(_))));
    assert!(matches!(Config::parse("bandit.hidden = 0"), Err(ConfigError::Invalid(_))));
    assert!(matches!(Config::parse("evaluate.holdout = 0.0"), Err(ConfigError::Invalid(_))));
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "seed = 5\ngenerator.n_accounts = 200\n").unwrap();
    let cfg = Config::resolve(Some(&path), Some(9)).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.generator.n_accounts, 200);
    assert_eq!(cfg.gen_config().seed, 9);
    assert!(matches!(Config::resolve(Some(&dir.path().join("missing.toml")), None), Err(ConfigError::Io { .. })));
}

#[test]
fn config_survives_a_json_round_trip() {
    let cfg = Config::parse("seed = 3\nuplift.learner = \"X\"\noptimizer.cooldown_days = 7").unwrap();
    let back: Config = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, back);
}
