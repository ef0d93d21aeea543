use std::collections::BTreeSet;
use std::io::Write;

use salesopt::engine::EngineError;
use salesopt::eventlog::Event;
use salesopt::service::{Service, ServiceError};
use salesopt::Config;
use salesopt_core::optimizer::{eligibility_filter, normalize_scores, ServedLog};
use salesopt_core::pipeline::score_accounts;
use salesopt_core::{AccountId, FeedbackEvent, FeedbackKind, Recommendation, RepId};

fn small_config(seed: u64) -> Config {
    let mut cfg = Config::parse("generator.n_accounts = 300\nbandit.hidden = 8\n").unwrap();
    cfg.seed = seed;
    cfg
}

fn served_today(s: &Service) -> Vec<Recommendation> {
    let reps: Vec<RepId> = s.read().unwrap().reps().iter().map(|r| r.id).collect();
    reps.into_iter().flat_map(|r| s.serve_recommendations(r).unwrap()).collect()
}

fn feedback(r: &Recommendation, kind: FeedbackKind) -> FeedbackEvent {
    FeedbackEvent::new(r.rep_id, r.account_id, r.action, kind, r.created_at)
}

#[test]
fn served_accounts_sit_out_the_cooldown_window() {
    let s = Service::in_memory(small_config(3)).unwrap();
    let window = s.read().unwrap().config().optimizer.cooldown_days;
    let mut by_day: Vec<Vec<Recommendation>> = Vec::new();
    for _ in 0..=window + 1 {
        s.run_pipeline().unwrap();
        by_day.push(served_today(&s));
    }
    assert!(!by_day[0].is_empty());
    for (t, recs) in by_day.iter().enumerate() {
        let ids: BTreeSet<AccountId> = recs.iter().map(|r| r.account_id).collect();
        assert_eq!(ids.len(), recs.len(), "account served twice on day {t}");
        for later in by_day.iter().skip(t + 1).take(window as usize) {
            assert!(later.iter().all(|r| !ids.contains(&r.account_id)), "day {t} account back inside the window");
        }
    }

    // On the day after the window, the eligible set is what the scores and
    // the served history give, which includes day 0's eligible accounts.
    let today = window + 1;
    let engine = s.read().unwrap();
    let mut pool = score_accounts(engine.models(), engine.accounts()).unwrap();
    normalize_scores(&mut pool);
    let history = ServedLog::from_recommendations(by_day[..today as usize].iter().flatten());
    let expected = eligibility_filter(&pool, &history, &engine.config().optimizer, today);
    let run = engine.runs().find(|r| r.summary.day == today).unwrap();
    assert_eq!(run.summary.eligible, expected.len());
    let eligible: BTreeSet<AccountId> = expected.iter().map(|s| s.account_id).collect();
    let score_ok = eligibility_filter(&pool, &ServedLog::new(), &engine.config().optimizer, today);
    let score_ok: BTreeSet<AccountId> = score_ok.iter().map(|s| s.account_id).collect();
    for r in &by_day[0] {
        assert!(score_ok.contains(&r.account_id));
        assert!(eligible.contains(&r.account_id), "{} still blocked on day {today}", r.account_id);
    }
    assert!(by_day[today as usize].iter().all(|r| eligible.contains(&r.account_id)));
}

#[test]
fn feedback_is_validated_staged_and_trained_at_day_close() {
    let s = Service::in_memory(small_config(4)).unwrap();
    assert!(matches!(s.serve_recommendations(RepId(1)), Err(ServiceError::Engine(EngineError::NoCompletedRun))));
    s.run_pipeline().unwrap();
    let recs = served_today(&s);
    assert!(recs.len() >= 4);

    let ack = s.ingest_feedback(feedback(&recs[0], FeedbackKind::DeepLinkClicked)).unwrap();
    assert_eq!((ack.reward, ack.duplicate), (1, false));
    let again = s.ingest_feedback(feedback(&recs[0], FeedbackKind::DeepLinkClicked)).unwrap();
    assert!(again.duplicate);
    assert!(again.seq > ack.seq);
    s.ingest_feedback(feedback(&recs[1], FeedbackKind::DeepLinkClicked)).unwrap();
    s.ingest_feedback(feedback(&recs[2], FeedbackKind::DeepLinkClicked)).unwrap();
    s.ingest_feedback(feedback(&recs[3], FeedbackKind::NotificationDismissed)).unwrap();

    let mut wrong_action = feedback(&recs[0], FeedbackKind::NoClick);
    wrong_action.action = ActionTypeExt::other(recs[0].action);
    assert!(matches!(s.ingest_feedback(wrong_action), Err(ServiceError::Engine(EngineError::ActionMismatch { .. }))));
    let mut wrong_reward = feedback(&recs[0], FeedbackKind::NoClick);
    wrong_reward.reward = 1;
    assert!(matches!(s.ingest_feedback(wrong_reward), Err(ServiceError::Engine(EngineError::RewardMismatch { .. }))));
    let mut unknown = feedback(&recs[0], FeedbackKind::NoClick);
    unknown.t = 5;
    assert!(matches!(s.ingest_feedback(unknown), Err(ServiceError::Engine(EngineError::UnknownRecommendation { .. }))));

    // Nothing trains until the day closes.
    assert_eq!(s.read().unwrap().bandit().updates, 0);
    let m = s.metrics_snapshot().unwrap();
    assert_eq!(m.cumulative_reward, 2);
    assert_eq!(m.feedback[&FeedbackKind::DeepLinkClicked], 3);
    assert_eq!(m.feedback[&FeedbackKind::NotificationDismissed], 1);

    s.run_pipeline().unwrap();
    assert_eq!(s.read().unwrap().bandit().updates, 4);
    let closed: Vec<usize> = s
        .read()
        .unwrap()
        .runs()
        .map(|r| r.summary.bandit_updates as usize)
        .collect();
    assert_eq!(closed, vec![0, 4]);

    // Late feedback for a closed day is kept for metrics but never trains.
    s.ingest_feedback(feedback(&recs[3], FeedbackKind::DeepLinkClicked)).unwrap();
    s.run_pipeline().unwrap();
    assert_eq!(s.read().unwrap().bandit().updates, 4);
    assert_eq!(s.metrics_snapshot().unwrap().cumulative_reward, 4);
}

trait ActionTypeExt {
    fn other(self) -> Self;
}

impl ActionTypeExt for salesopt_core::ActionType {
    fn other(self) -> Self {
        *salesopt_core::ActionType::ALL.iter().find(|&&a| a != self).unwrap()
    }
}

fn drive(s: &Service, days: usize) {
    let kinds = [FeedbackKind::DeepLinkClicked, FeedbackKind::NotificationDismissed, FeedbackKind::NoClick];
    for day in 0..days {
        s.run_pipeline().unwrap();
        for (i, r) in served_today(s).iter().enumerate() {
            if (i + day) % 4 != 3 {
                s.ingest_feedback(feedback(r, kinds[(i * 7 + day) % 3])).unwrap();
            }
        }
    }
}

#[test]
fn replay_reproduces_the_live_engine() {
    let s = Service::in_memory(small_config(5)).unwrap();
    drive(&s, 6);
    let replayed = s.replay().unwrap();
    let live = s.read().unwrap();
    assert!(live.bandit().updates > 0);
    assert!(live.bandit().max_abs_diff(replayed.bandit()) <= 1e-10);
    assert_eq!(live.metrics(), replayed.metrics());
    assert_eq!(live.runs().collect::<Vec<_>>(), replayed.runs().collect::<Vec<_>>());
    for rep in live.reps() {
        assert_eq!(live.recommendations_for(rep.id).unwrap(), replayed.recommendations_for(rep.id).unwrap());
    }
}

#[test]
fn reopening_a_log_resumes_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let (metrics, params) = {
        let s = Service::open_or_create(&path, small_config(6)).unwrap();
        drive(&s, 3);
        let e = s.read().unwrap();
        (e.metrics(), e.bandit().net.params.clone())
    };
    std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"seq\":99,\"ki").unwrap();

    // The config argument is ignored when the log exists.
    let s = Service::open_or_create(&path, small_config(77)).unwrap();
    assert_eq!(s.read().unwrap().config().seed, 6);
    assert_eq!(s.metrics_snapshot().unwrap(), metrics);
    assert_eq!(s.read().unwrap().bandit().net.params, params);
    let info = s.run_pipeline().unwrap();
    assert_eq!(info.summary.day, 3);
    assert_eq!(info.summary.run_id, "run-0004");
    assert!(s.log_lines().unwrap().iter().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn each_run_closes_the_previous_day_once() {
    let s = Service::in_memory(small_config(8)).unwrap();
    drive(&s, 3);
    let lines = s.log_lines().unwrap();
    let records: Vec<_> = lines.iter().map(|l| salesopt::eventlog::Record::from_line(l).unwrap()).collect();
    let count = |pred: fn(&Event) -> bool| records.iter().filter(|r| pred(&r.event)).count();
    assert_eq!(count(|e| matches!(e, Event::SessionStarted(_))), 1);
    assert_eq!(count(|e| matches!(e, Event::RunCommitted(_))), 3);
    assert_eq!(count(|e| matches!(e, Event::DayClosed(_))), 2);
    assert_eq!(count(|e| matches!(e, Event::PolicySnapshot(_))), 2);
    assert!(records.windows(2).all(|w| w[1].seq == w[0].seq + 1));
}
