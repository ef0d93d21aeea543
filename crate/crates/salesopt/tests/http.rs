use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use salesopt::http::router;
use salesopt::service::Service;
use salesopt::Config;

fn app() -> Router {
    let cfg = Config::parse("seed = 11\ngenerator.n_accounts = 300\nbandit.hidden = 8\n").unwrap();
    router(Arc::new(Service::in_memory(cfg).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

#[tokio::test]
async fn endpoints_report_their_status_codes() {
    let app = app();
    let (status, body) = call(&app, "GET", "/reps/1/recommendations", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("no completed run"));

    let (status, run) = call(&app, "POST", "/runs", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(run["manifest"]["run_id"], "run-0001");
    assert_eq!(run["manifest"]["seed"], 11);
    assert_eq!(run["summary"]["day"], 0);

    let (status, fetched) = call(&app, "GET", "/runs/run-0001", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched, run);
    assert_eq!(call(&app, "GET", "/runs/run-0099", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/reps/999/recommendations", None).await.0, StatusCode::NOT_FOUND);

    let bad = json!({"rep_id": 1, "account_id": 123456, "action": "PromoteUpsell", "feedback": "NoClick", "t": 0});
    let (status, body) = call(&app, "POST", "/feedback", Some(bad)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].is_string());
    let (status, body) = call(&app, "POST", "/feedback", Some(json!({"rep_id": 1}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("account_id"));
    let (status, body) = call(&app, "GET", "/reps/abc/recommendations", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());

    let (status, metrics) = call(&app, "GET", "/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(metrics["runs"], 1);
}

#[tokio::test]
async fn recommendations_come_in_rank_order() {
    let app = app();
    call(&app, "POST", "/runs", None).await;
    let mut seen = 0;
    for rep in 1..=20 {
        let (status, recs) = call(&app, "GET", &format!("/reps/{rep}/recommendations"), None).await;
        if status == StatusCode::NOT_FOUND {
            break;
        }
        let recs = recs.as_array().unwrap();
        let ranks: Vec<u64> = recs.iter().map(|r| r["r_rank"].as_u64().unwrap()).collect();
        assert_eq!(ranks, (1..=recs.len() as u64).collect::<Vec<_>>());
        assert!(recs.iter().all(|r| r["rep_id"] == rep));
        seen += recs.len();
    }
    assert!(seen > 0);
}

/// The console maps Open, Dismiss and an unanswered alert at day close to
/// the three feedback kinds, then reads the totals back from /metrics.
#[tokio::test]
async fn console_round_trip() {
    let app = app();
    call(&app, "POST", "/runs", None).await;
    let (_, recs) = call(&app, "GET", "/reps/1/recommendations", None).await;
    let recs = recs.as_array().unwrap().clone();
    assert!(recs.len() >= 3, "rep 1 got {}", recs.len());
    for r in &recs {
        for key in ["account_id", "rep_id", "action", "cold_start_action", "g_rank", "r_rank", "a_value", "explanation", "created_at"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
        assert!(["BoostEngagement", "PreventChurn", "PromoteUpsell"].contains(&r["action"].as_str().unwrap()));
    }

    let console = [("open", "DeepLinkClicked", 1), ("dismiss", "NotificationDismissed", -1), ("day_close", "NoClick", 0)];
    for (r, (_, kind, reward)) in recs.iter().zip(console) {
        let body = json!({
            "rep_id": r["rep_id"], "account_id": r["account_id"], "action": r["action"],
            "feedback": kind, "reward": reward, "t": r["created_at"],
        });
        let (status, ack) = call(&app, "POST", "/feedback", Some(body)).await;
        assert_eq!(status, StatusCode::OK, "{ack}");
        assert_eq!(ack["reward"], reward);
        assert_eq!(ack["duplicate"], false);
    }
    let mismatched = json!({
        "rep_id": recs[0]["rep_id"], "account_id": recs[0]["account_id"], "action": recs[0]["action"],
        "feedback": "NoClick", "reward": 1, "t": 0,
    });
    assert_eq!(call(&app, "POST", "/feedback", Some(mismatched)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (_, m) = call(&app, "GET", "/metrics", None).await;
    assert_eq!(m["cumulative_reward"], 0);
    assert_eq!(m["feedback"], json!({"DeepLinkClicked": 1, "NotificationDismissed": 1, "NoClick": 1}));
    assert_eq!(m["bandit_updates"], 0);
    assert_eq!(m["days"][0]["day"], 0);
    let share: f64 = m["selection_share"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert!((share - 1.0).abs() < 1e-12);

    let (status, run) = call(&app, "POST", "/runs", None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(run["summary"]["bandit_updates"], 3);
    let (_, m) = call(&app, "GET", "/metrics", None).await;
    assert_eq!(m["bandit_updates"], 3);
    assert_eq!(m["day"], 1);
}
