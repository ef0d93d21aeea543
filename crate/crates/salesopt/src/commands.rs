//! Implementations behind the CLI subcommands. Each writes its records to
//! the output directory and returns an aligned table for stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use salesopt_core::bandit::simulation::{run_simulation, Trace};
use salesopt_core::datagen::{metric_name, SyntheticWorld};
use salesopt_core::domain::{Account, ActionType, FeedbackKind, PanelObservation};
use salesopt_core::evalharness::{
    cem_match, default_cuts, did_estimate, placebo_pretest, run_ablation_seeds, uplift_deciles, CemUnit, Coarsening,
};
use salesopt_core::explain::grouping::synthetic_feature_names;
use salesopt_core::explain::importance::FeatureStats;
use salesopt_core::explain::{generate_narrative, group_features, instance_importance, FeatureMapping, ImportanceConfig};
use salesopt_core::forecast::{evaluate as forecast_eval, fit_forecaster, Target};
use salesopt_core::linalg::Matrix;
use salesopt_core::optimizer::ServedLog;
use salesopt_core::pipeline::{self, DayRequest, Variant};
use salesopt_core::stats;
use salesopt_core::uplift::{decile_spearman, fit_uplift};

use crate::config::{Config, ExplorationMode};
use crate::engine::Engine;
use crate::eventlog::read_records;
use crate::table::{opt, Table};
use crate::textgen;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("io on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("encoding {path}: {message}")]
    Encode { path: String, message: String },
    #[error("{0}")]
    Failed(String),
}

fn failed(e: impl std::fmt::Display) -> CommandError {
    CommandError::Failed(e.to_string())
}

/// Tables for stdout and the files written.
#[derive(Debug, Default)]
pub struct Output {
    pub text: String,
    pub files: Vec<PathBuf>,
}

impl Output {
    fn section(&mut self, title: &str, table: &Table) {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        self.text.push_str(title);
        self.text.push('\n');
        self.text.push_str(&table.to_string());
    }
}

struct Writer<'a> {
    dir: &'a Path,
    out: &'a mut Output,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> Result<PathBuf, CommandError> {
        fs::create_dir_all(self.dir).map_err(|source| CommandError::Io { path: self.dir.display().to_string(), source })?;
        Ok(self.dir.join(name))
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, items: impl IntoIterator<Item = T>) -> Result<(), CommandError> {
        let path = self.path(name)?;
        let p = path.display().to_string();
        let mut buf = Vec::new();
        for item in items {
            serde_json::to_writer(&mut buf, &item).map_err(|e| CommandError::Encode { path: p.clone(), message: e.to_string() })?;
            buf.push(b'\n');
        }
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|source| CommandError::Io { path: p, source })?;
        self.out.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CommandError> {
        let path = self.path(name)?;
        let p = path.display().to_string();
        let text = serde_json::to_string_pretty(value).map_err(|e| CommandError::Encode { path: p.clone(), message: e.to_string() })?;
        fs::write(&path, text + "\n").map_err(|source| CommandError::Io { path: p, source })?;
        self.out.files.push(path);
        Ok(())
    }
}

fn world(cfg: &Config) -> Result<(SyntheticWorld, Vec<Account>, Vec<salesopt_core::domain::Rep>), CommandError> {
    let w = SyntheticWorld::new(cfg.gen_config()).map_err(failed)?;
    let (accounts, reps) = w.generate_population();
    Ok((w, accounts, reps))
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

pub fn gen(cfg: &Config, out_dir: &Path) -> Result<Output, CommandError> {
    let (w, accounts, reps) = world(cfg)?;
    let panel = w.generate_panel(cfg.evaluate.injected_effect);
    let mut out = Output::default();
    let mut wr = Writer { dir: out_dir, out: &mut out };
    wr.jsonl("accounts.jsonl", &accounts)?;
    wr.jsonl("reps.jsonl", &reps)?;
    wr.jsonl("panel.jsonl", &panel)?;
    let ite: Vec<f64> = accounts.iter().filter_map(|a| a.true_ite).collect();
    let d: Vec<f64> = accounts.iter().map(|a| a.d as f64).collect();
    let mut t = Table::new(["dataset", "rows", "statistic", "value"]);
    t.row(["accounts".to_string(), accounts.len().to_string(), "mean true ITE".into(), f4(stats::mean(&ite))]);
    t.row(["accounts".to_string(), accounts.len().to_string(), "median days to renewal".into(), f4(stats::median(&d))]);
    t.row(["reps".to_string(), reps.len().to_string(), "rep features".into(), cfg.generator.rep_dim.to_string()]);
    t.row(["panel".to_string(), panel.len().to_string(), "injected effect".into(), f4(cfg.evaluate.injected_effect)]);
    out.section("generated data", &t);
    Ok(out)
}

pub fn train(cfg: &Config, out_dir: &Path) -> Result<Output, CommandError> {
    let (w, accounts, _) = world(cfg)?;
    let models = pipeline::train_models(&w, &accounts, &cfg.training()).map_err(failed)?;
    let mut out = Output::default();
    Writer { dir: out_dir, out: &mut out }.json("models.json", &models)?;
    let pred: Vec<f64> = accounts.iter().map(|a| models.uplift.predict_ite(&a.x_u())).collect();
    let truth: Vec<f64> = accounts.iter().map(|a| a.true_ite.unwrap_or(f64::NAN)).collect();
    let mut t = Table::new(["model", "kind", "rows", "rmse vs truth"]);
    t.row([
        "uplift".to_string(),
        format!("{:?}", models.uplift.kind),
        accounts.len().to_string(),
        f4(stats::rmse(&pred, &truth)),
    ]);
    for (m, f) in models.engagement.forecasters.iter().enumerate() {
        let p: Vec<f64> = accounts.iter().map(|a| f.predict(&a.x_e())).collect();
        let y: Vec<f64> = accounts.iter().map(|a| w.expected_next_engagement(a)[m]).collect();
        t.row([format!("forecast {}", metric_name(m)), "engagement".to_string(), accounts.len().to_string(), f4(stats::rmse(&p, &y))]);
    }
    out.section("trained models", &t);
    Ok(out)
}

pub fn optimize(cfg: &Config, out_dir: &Path, narrate: usize) -> Result<Output, CommandError> {
    let (w, accounts, reps) = world(cfg)?;
    let models = pipeline::train_models(&w, &accounts, &cfg.training()).map_err(failed)?;
    let served = ServedLog::new();
    let req = DayRequest {
        accounts: &accounts,
        reps: &reps,
        models: &models,
        params: &cfg.optimizer,
        variant: Variant::Full,
        served: &served,
        today: 0,
    };
    let plan = pipeline::run_day(&req, None).map_err(failed)?;
    let mut out = Output::default();
    let mut wr = Writer { dir: out_dir, out: &mut out };
    wr.jsonl("recommendations.jsonl", &plan.recommendations)?;

    let mut narratives = Vec::new();
    if narrate > 0 {
        let names = synthetic_feature_names(cfg.generator.account_dim);
        let groups = group_features(&names, &FeatureMapping::default());
        let x = Matrix::from_rows(&accounts.iter().map(Account::x_u).collect::<Vec<_>>());
        let fstats = FeatureStats::from_rows(&x);
        let client = textgen::client(&cfg.textgen);
        let model = |v: &[f64]| models.uplift.predict_ite(v);
        let mut top: Vec<_> = plan.recommendations.iter().collect();
        top.sort_by_key(|r| r.g_rank);
        for r in top.into_iter().take(narrate) {
            let acc = accounts.iter().find(|a| a.id == r.account_id).ok_or_else(|| failed("unknown account"))?;
            let icfg = ImportanceConfig { seed: cfg.seed, ..ImportanceConfig::default() };
            let imp = instance_importance(&model, &acc.x_u(), &names, &fstats, acc.id, &icfg).map_err(failed)?;
            let n = generate_narrative(&imp, &groups, &Default::default(), r.action, &client);
            narratives.push(serde_json::json!({ "account_id": r.account_id, "rep_id": r.rep_id, "narrative": n }));
        }
        wr.jsonl("narratives.jsonl", &narratives)?;
    }

    let mut t = Table::new(["rep", "rRank", "gRank", "account", "action", "a", "explanation"]);
    let mut recs = plan.recommendations.clone();
    recs.sort_by_key(|r| (r.rep_id, r.r_rank));
    for r in &recs {
        t.row([
            r.rep_id.to_string(),
            r.r_rank.to_string(),
            r.g_rank.to_string(),
            r.account_id.to_string(),
            r.action.label().to_string(),
            format!("{:.3}", r.a_value),
            r.explanation.clone(),
        ]);
    }
    out.section(&format!("day 0: {} eligible of {}, objective {:.3}", plan.eligible, plan.pool_size, plan.objective), &t);
    for n in &narratives {
        out.text.push('\n');
        out.text.push_str(n["narrative"]["text"].as_str().unwrap_or_default());
        out.text.push('\n');
    }
    Ok(out)
}

pub fn simulate_bandit(cfg: &Config, out_dir: &Path, mode: Option<ExplorationMode>) -> Result<Output, CommandError> {
    let (w, accounts, reps) = world(cfg)?;
    let env = w.bandit_env();
    let modes = match mode {
        Some(m) => vec![m],
        None => vec![ExplorationMode::Thompson, ExplorationMode::Ucb],
    };
    let mut out = Output::default();
    let mut t = Table::new(["mode", "rounds", "cumulative reward", "share BoostEngagement", "share PreventChurn", "share PromoteUpsell", "clicks", "dismissals", "no clicks"]);
    let mut traces: Vec<(ExplorationMode, Trace)> = Vec::new();
    for m in modes {
        let mut c = cfg.clone();
        c.bandit.mode = m;
        let (trace, _) = run_simulation(&env, &accounts, &reps, &c.bandit_params(), &c.simulation_config());
        let n = trace.rows.len();
        let share = trace.selection_share(n.saturating_sub(500)..n);
        let fb = trace.feedback_distribution();
        t.row([
            label(m).to_string(),
            n.to_string(),
            trace.cumulative_reward().to_string(),
            f4(share[0]),
            f4(share[1]),
            f4(share[2]),
            fb[0].to_string(),
            fb[1].to_string(),
            fb[2].to_string(),
        ]);
        traces.push((m, trace));
    }
    let mut wr = Writer { dir: out_dir, out: &mut out };
    for (m, trace) in &traces {
        wr.jsonl(&format!("trace_{}.jsonl", label(*m)), &trace.rows)?;
        let daily = trace.feedback_by_day().into_iter().map(|(day, c)| {
            serde_json::json!({
                "day": day,
                format!("{:?}", FeedbackKind::DeepLinkClicked): c[0],
                format!("{:?}", FeedbackKind::NotificationDismissed): c[1],
                format!("{:?}", FeedbackKind::NoClick): c[2],
            })
        });
        wr.jsonl(&format!("daily_{}.jsonl", label(*m)), daily)?;
    }
    out.section("bandit simulation (action shares over the last 500 rounds)", &t);
    Ok(out)
}

fn label(m: ExplorationMode) -> &'static str {
    match m {
        ExplorationMode::Thompson => "thompson",
        ExplorationMode::Ucb => "ucb",
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalSelection {
    pub deciles: bool,
    pub forecast: bool,
    pub did: bool,
    pub placebo: bool,
    pub cem: bool,
}

impl EvalSelection {
    pub fn all() -> Self {
        Self { deciles: true, forecast: true, did: true, placebo: true, cem: true }
    }

    pub fn any(&self) -> bool {
        self.deciles || self.forecast || self.did || self.placebo || self.cem
    }
}

pub fn evaluate(cfg: &Config, out_dir: &Path, sel: EvalSelection) -> Result<Output, CommandError> {
    let sel = if sel.any() { sel } else { EvalSelection::all() };
    let mut out = Output::default();
    let mut records: Vec<serde_json::Value> = Vec::new();
    if sel.deciles || sel.forecast {
        let (w, accounts, _) = world(cfg)?;
        let n_train = ((1.0 - cfg.evaluate.holdout) * accounts.len() as f64).round() as usize;
        let (train, test) = accounts.split_at(n_train.clamp(1, accounts.len() - 1));
        if sel.deciles {
            let a_train = w.assign_treatment(train);
            let y_train = w.simulate_outcomes(train, &a_train);
            let x_train = Matrix::from_rows(&train.iter().map(Account::x_u).collect::<Vec<_>>());
            let model = fit_uplift(&cfg.training().uplift, &x_train, &a_train, &y_train).map_err(failed)?;
            let a_test = w.assign_treatment(test);
            let y_test = w.simulate_outcomes(test, &a_test);
            let scores: Vec<f64> = test.iter().map(|a| model.predict_ite(&a.x_u())).collect();
            let table = uplift_deciles(&scores, &y_test, &a_test).map_err(failed)?;
            let mut t = Table::new(["decile", "count", "treated", "control", "mean score", "empirical uplift"]);
            for r in &table {
                t.row([
                    r.decile.to_string(),
                    r.count.to_string(),
                    r.treated.to_string(),
                    r.control.to_string(),
                    f4(r.mean_score),
                    opt(r.empirical_uplift, 4),
                ]);
            }
            let rho = decile_spearman(&table);
            out.section(&format!("uplift deciles on held-out accounts (Spearman {rho:.3})"), &t);
            records.push(serde_json::json!({ "kind": "deciles", "spearman": rho, "rows": table }));
        }
        if sel.forecast {
            let mut t = Table::new(["metric", "train rows", "test rows", "MAE", "RMSE"]);
            let x_tr = Matrix::from_rows(&train.iter().map(Account::x_e).collect::<Vec<_>>());
            let x_te = Matrix::from_rows(&test.iter().map(Account::x_e).collect::<Vec<_>>());
            for m in 0..cfg.generator.engagement_metrics {
                let y_tr: Vec<f64> = train.iter().map(|a| w.next_engagement(a)[m]).collect();
                let y_te: Vec<f64> = test.iter().map(|a| w.next_engagement(a)[m]).collect();
                let f = fit_forecaster(&x_tr, &y_tr, Target::for_metric(m), &cfg.forecast.base_spec()).map_err(failed)?;
                let e = forecast_eval(&f, &x_te, &y_te).map_err(failed)?;
                t.row([metric_name(m), train.len().to_string(), test.len().to_string(), f4(e.mae), f4(e.rmse)]);
                records.push(serde_json::json!({ "kind": "forecast", "metric": metric_name(m), "mae": e.mae, "rmse": e.rmse }));
            }
            out.section("engagement forecast error on held-out accounts", &t);
        }
    }
    if sel.did || sel.placebo || sel.cem {
        let panel = salesopt_core::datagen::generate_panel(&cfg.panel, cfg.seed, cfg.evaluate.injected_effect);
        if sel.did {
            let r = did_estimate(&panel).map_err(failed)?;
            let mut t = Table::new(["statistic", "value"]);
            t.row(["treat pre".to_string(), f4(r.means.treat_pre)]);
            t.row(["treat post".to_string(), f4(r.means.treat_post)]);
            t.row(["ctrl pre".to_string(), f4(r.means.ctrl_pre)]);
            t.row(["ctrl post".to_string(), f4(r.means.ctrl_post)]);
            t.row(["tau_hat".to_string(), format!("{:.6}", r.tau_hat)]);
            t.row(["rte".to_string(), f4(r.rte)]);
            if let Some(i) = r.inference {
                t.row(["std error".to_string(), f4(i.std_error)]);
                t.row(["p value".to_string(), f4(i.p_value)]);
                t.row(["ci low".to_string(), f4(i.ci_low)]);
                t.row(["ci high".to_string(), f4(i.ci_high)]);
            }
            out.section("difference in differences", &t);
            records.push(serde_json::json!({ "kind": "did", "result": r }));
        }
        if sel.placebo {
            let r = placebo_pretest(&panel, &default_cuts(&panel), cfg.evaluate.alpha).map_err(failed)?;
            let mut t = Table::new(["cut", "tau_hat", "p value", "significant"]);
            for ((cut, res), sig) in r.cuts.iter().zip(&r.results).zip(&r.significant) {
                t.row([cut.to_string(), f4(res.tau_hat), opt(res.inference.map(|i| i.p_value), 4), sig.to_string()]);
            }
            out.section(
                &format!("placebo pre-test (alpha per cut {:.4}; parallel trends plausible: {})", r.alpha_per_cut, r.parallel_trends_plausible),
                &t,
            );
            records.push(serde_json::json!({ "kind": "placebo", "result": r }));
        }
        if sel.cem {
            let units = panel_units(&panel);
            let k = units.first().map_or(0, |u| u.covariates.len());
            let lo = units.iter().flat_map(|u| u.covariates.iter().copied()).fold(f64::INFINITY, f64::min);
            let hi = units.iter().flat_map(|u| u.covariates.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
            let coarsening = Coarsening::uniform(k, lo, hi, cfg.evaluate.cem_bins).map_err(failed)?;
            let r = cem_match(&units, &coarsening).map_err(failed)?;
            let mut t = Table::new(["covariate", "SMD before", "SMD after"]);
            for c in 0..k {
                t.row([c.to_string(), f4(r.smd_before[c]), f4(r.smd_after[c])]);
            }
            out.section(
                &format!(
                    "coarsened exact matching: {} treated, {} control kept; {} treated and {} control dropped; {} strata",
                    r.treated.len(),
                    r.control.len(),
                    r.dropped_treated,
                    r.dropped_control,
                    r.strata.len()
                ),
                &t,
            );
            records.push(serde_json::json!({ "kind": "cem", "result": r }));
        }
    }
    Writer { dir: out_dir, out: &mut out }.jsonl("evaluation.jsonl", &records)?;
    Ok(out)
}

/// One matching unit per panel unit.
pub fn panel_units(panel: &[PanelObservation]) -> Vec<CemUnit> {
    let mut seen = std::collections::BTreeMap::new();
    for o in panel {
        seen.entry(o.unit_id).or_insert_with(|| CemUnit {
            id: o.unit_id,
            treated: o.group == salesopt_core::domain::Group::Treat,
            covariates: o.covariates.clone(),
        });
    }
    seen.into_values().collect()
}

pub fn ablate(cfg: &Config, out_dir: &Path) -> Result<Output, CommandError> {
    let seeds: Vec<u64> = (0..u64::from(cfg.ablation.seeds.max(1))).map(|i| cfg.seed + i).collect();
    let summary = run_ablation_seeds(&cfg.ablation_config(), &seeds).map_err(failed)?;
    let mut out = Output::default();
    Writer { dir: out_dir, out: &mut out }.json("ablation.json", &summary)?;
    let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}%", 100.0 * x));
    let mut t = Table::new(["variant", "P_ups", "P_ch", "P_rec", "P_low", "B_total rank", "constraints met", "load vs capacity"]);
    for r in &summary.rows {
        t.row([
            r.variant.label().to_string(),
            pct(r.p_ups),
            pct(r.p_ch),
            pct(r.p_rec),
            pct(r.p_low),
            r.b_total_rank.to_string(),
            pct(Some(r.constraints_met)),
            pct(Some(r.over_capacity)),
        ]);
    }
    out.section(&format!("ablation, medians over {} seeds", seeds.len()), &t);
    Ok(out)
}

pub fn replay(log_path: &Path, out_dir: &Path) -> Result<Output, CommandError> {
    let (records, _) = read_records(log_path).map_err(failed)?;
    let engine = Engine::replay(&records).map_err(failed)?;
    let metrics = engine.metrics();
    let mut out = Output::default();
    Writer { dir: out_dir, out: &mut out }.json("replay_metrics.json", &metrics)?;
    let mut t = Table::new(["run", "day", "recommendations", "eligible", "objective"]);
    for r in engine.runs() {
        let s = &r.summary;
        t.row([s.run_id.clone(), s.day.to_string(), s.recommendations.to_string(), s.eligible.to_string(), f4(s.objective)]);
    }
    out.section(
        &format!(
            "replayed {} records: {} bandit updates, cumulative reward {}",
            records.len(),
            metrics.bandit_updates,
            metrics.cumulative_reward
        ),
        &t,
    );
    let mut a = Table::new(["action", "selection share"]);
    for act in ActionType::ALL {
        a.row([act.label().to_string(), f4(metrics.selection_share.get(&act).copied().unwrap_or(0.0))]);
    }
    out.section("served actions", &a);
    Ok(out)
}
