use std::io::Write;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use commons_core::ledger::read_ndjson;
use commons_core::time::{MS_PER_DAY, MS_PER_HOUR};
use commons_core::{replay, Calendar, ManualClock, Timestamp, YearMonth};
use commons_service::{open, router, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn april() -> u64 {
    Calendar::default().month_start(YearMonth::new(2024, 4).unwrap()).0
}

fn cfg(dir: &tempfile::TempDir, simulation: bool, api_key: Option<&str>) -> ServiceConfig {
    ServiceConfig {
        store: dir.path().join("log.ndjson"),
        simulation,
        api_key: api_key.map(String::from),
        ..ServiceConfig::default()
    }
}

fn app(cfg: &ServiceConfig) -> Router {
    router(open(cfg, Arc::new(ManualClock::new(Timestamp(april())))).unwrap())
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, String) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(k) = key {
        req = req.header("authorization", format!("Bearer {k}"));
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, text) = send(app, method, uri, body, None).await;
    (s, if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap() })
}

async fn seed(app: &Router) {
    let config = json!({
        "chores": [{"name": "Dishes"}, {"name": "Sweep"}, {"name": "Trash"}],
        "accounts": [{"name": "General", "monthly_refill_cents": 10000}],
    });
    let (s, _) = call(app, "POST", "/houses", Some(json!({"id": "sage", "config": config, "at": april()}))).await;
    assert_eq!(s, StatusCode::CREATED);
    for i in 0..5 {
        let (s, _) = call(app, "POST", "/houses/sage/residents", Some(json!({"resident": format!("r{i}"), "at": april()}))).await;
        assert_eq!(s, StatusCode::CREATED);
    }
}

#[tokio::test]
async fn empty_store_is_healthy() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, false, None));
    let (s, v) = call(&app, "GET", "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["houses"], 0);
    assert_eq!(v["status"], "ok");
}

#[tokio::test]
async fn chore_claim_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, true, None));
    seed(&app).await;

    // Simulation mode insists on explicit timestamps.
    let (s, v) = call(&app, "POST", "/houses/sage/chores/0/claim", Some(json!({"resident": "r0"}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("MissingTimestamp")));

    let t = april() + 48 * MS_PER_HOUR;
    let (s, board) = call(&app, "GET", &format!("/houses/sage/chores?at={t}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let board = board.as_array().unwrap();
    assert_eq!(board.len(), 3);
    // 500 points a month over three equal chores, two days in.
    let expected = 500.0 / 3.0 * 2.0 / 30.0;
    assert!((board[0]["value"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert!(board[0]["ratePerHour"].as_f64().unwrap() > 0.0);

    let (s, claim) = call(&app, "POST", "/houses/sage/chores/0/claim", Some(json!({"resident": "r0", "at": t}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert!((claim["valueAtClaim"].as_f64().unwrap() - expected).abs() < 1e-9);
    let proposal = claim["proposal"].as_u64().unwrap();

    let (s, v) = call(&app, "POST", "/houses/sage/chores/0/claim", Some(json!({"resident": "r1", "at": t}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("ZeroValue")));

    let (_, open) = call(&app, "GET", &format!("/houses/sage/proposals?at={t}"), None).await;
    assert_eq!(open[0]["id"].as_u64(), Some(proposal));
    assert_eq!(open[0]["tally"]["upvotes"], 1);

    let (s, _) = call(
        &app,
        "POST",
        &format!("/houses/sage/proposals/{proposal}/ballots"),
        Some(json!({"resident": "r1", "direction": "up", "at": t + 1})),
    )
    .await;
    assert_eq!(s, StatusCode::NO_CONTENT);

    let done = t + 3 * MS_PER_DAY;
    let (s, events) = call(&app, "POST", "/houses/sage/tick", Some(json!({"at": done}))).await;
    assert_eq!(s, StatusCode::OK);
    let kinds: Vec<_> = events.as_array().unwrap().iter().map(|e| e["kind"].as_str().unwrap().to_string()).collect();
    assert_eq!(kinds, ["ProposalResolved", "ClaimVerified"]);

    let (_, stmts) = call(&app, "GET", "/houses/sage/obligations/2024-04", None).await;
    let r0 = stmts.as_array().unwrap().iter().find(|s| s["resident"] == "r0").unwrap();
    assert!((r0["earnedPoints"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert_eq!(r0["owedPoints"].as_f64(), Some(100.0));

    let (_, p) = call(&app, "GET", &format!("/houses/sage/proposals/{proposal}?at={done}"), None).await;
    assert_eq!(p["resolution"]["outcome"], "passed");
    assert_eq!(p["open"], false);

    let (s, v) = call(&app, "GET", "/houses/sage/chores/x/claim", None).await;
    assert_eq!(s, StatusCode::METHOD_NOT_ALLOWED, "{v}");
    let (s, v) = call(&app, "POST", "/houses/sage/chores/99/claim", Some(json!({"resident": "r0", "at": done}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownChore")));
    let (s, v) = call(&app, "GET", "/houses/nowhere/chores", None).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownHouse")));
}

#[tokio::test]
async fn preferences_and_priorities() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, true, None));
    seed(&app).await;
    let t = april() + MS_PER_HOUR;
    let body = json!({"resident": "r0", "preferred": 0, "deprioritized": 2, "at": t});
    assert_eq!(call(&app, "POST", "/houses/sage/preferences", Some(body)).await.0, StatusCode::CREATED);
    let (_, pr) = call(&app, "GET", "/houses/sage/priorities", None).await;
    let w: Vec<f64> = pr.as_array().unwrap().iter().map(|p| p["weight"].as_f64().unwrap()).collect();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(w[0] > w[1] && w[0] > w[2] && w[1] >= w[2], "{w:?}");
    let same = json!({"resident": "r0", "preferred": 1, "deprioritized": 1, "at": t});
    let (s, v) = call(&app, "POST", "/houses/sage/preferences", Some(same)).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("SameChore")));
}

#[tokio::test]
async fn hearts_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, true, None));
    seed(&app).await;
    let t = april() + MS_PER_HOUR;
    let (s, _) = call(&app, "POST", "/houses/sage/karma", Some(json!({"giver": "r0", "recipient": "r1", "at": t}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, v) = call(&app, "POST", "/houses/sage/karma", Some(json!({"giver": "r0", "recipient": "r0", "at": t}))).await;
    assert_eq!(v["error"], "SelfKarma", "{s}");

    let body = json!({"challenger": "r0", "challengee": "r2", "stake": 0.5, "reason": "dishes", "at": t});
    let (s, v) = call(&app, "POST", "/houses/sage/challenges", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED);
    let p = v["proposal"].as_u64().unwrap();
    for r in ["r1", "r3", "r4"] {
        let b = json!({"resident": r, "direction": "up", "at": t + 1});
        assert_eq!(call(&app, "POST", &format!("/houses/sage/proposals/{p}/ballots"), Some(b)).await.0, StatusCode::NO_CONTENT);
    }
    call(&app, "POST", "/houses/sage/tick", Some(json!({"at": t + 7 * MS_PER_DAY}))).await;
    let (_, board) = call(&app, "GET", "/houses/sage/hearts", None).await;
    let r2 = board.as_array().unwrap().iter().find(|r| r["resident"] == "r2").unwrap();
    assert_eq!(r2["hearts"].as_f64(), Some(4.5));
    let (_, hist) = call(&app, "GET", "/houses/sage/hearts/r2/history", None).await;
    assert_eq!(hist[0]["delta"].as_f64(), Some(-0.5));
    assert_eq!(hist[0]["cause"], "challengeLoss");
    let (s, _) = call(&app, "GET", "/houses/sage/hearts/ghost/history", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn purchases_accounts_and_ledger_csv() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, true, None));
    seed(&app).await;
    let t = april() + MS_PER_HOUR;

    for (price, free_form, min) in [(2000, false, 1), (18000, false, 4), (2000, true, 2)] {
        let (_, v) = call(&app, "GET", &format!("/houses/sage/purchases/threshold?price={price}&freeForm={free_form}"), None).await;
        assert_eq!(v["minUpvotes"], min, "{price} {free_form}");
    }

    let buy = json!({
        "proposer": "r0",
        "item": {"type": "freeForm", "name": "sponges"},
        "price": 3000,
        "account": 0,
        "at": t,
    });
    let (s, p) = call(&app, "POST", "/houses/sage/purchases", Some(buy)).await;
    assert_eq!(s, StatusCode::CREATED, "{p}");
    assert_eq!(p["minUpvotes"], 2);
    let id = p["proposal"].as_u64().unwrap();
    call(&app, "POST", &format!("/houses/sage/proposals/{id}/ballots"), Some(json!({"resident": "r1", "direction": "up", "at": t}))).await;

    let too_much = json!({"proposer": "r0", "item": {"type": "freeForm", "name": "sofa"}, "price": 50000, "account": 0, "at": t});
    let (s, v) = call(&app, "POST", "/houses/sage/purchases", Some(too_much)).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("InsufficientFunds")));

    call(&app, "POST", "/houses/sage/tick", Some(json!({"at": t + 7 * MS_PER_DAY}))).await;
    let (_, accts) = call(&app, "GET", "/houses/sage/accounts", None).await;
    assert_eq!(accts[0]["balance"], 7000);
    let (_, april_buys) = call(&app, "GET", "/houses/sage/purchases?month=2024-04", None).await;
    assert_eq!(april_buys.as_array().unwrap().len(), 1);
    assert_eq!(april_buys[0]["status"], "settled");
    let (_, may_buys) = call(&app, "GET", "/houses/sage/purchases?month=2024-05", None).await;
    assert!(may_buys.as_array().unwrap().is_empty());
    let (s, _) = call(&app, "GET", "/houses/sage/purchases?month=April", None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let (s, csv) = send(&app, "GET", "/houses/sage/ledger.csv", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "at,account,delta_cents,kind,buyer");
    assert_eq!(lines[1], format!("{},General,10000,refill,", april()));
    assert_eq!(lines[2], format!("{},General,-3000,purchase,r0", t + 7 * MS_PER_DAY));

    let t = t + 7 * MS_PER_DAY;
    let amend = json!({"resident": "r0", "amendment": {"action": "create", "name": "Major Purchases", "monthlyRefill": 5000}, "at": t});
    let (s, v) = call(&app, "POST", "/houses/sage/accounts/amendments", Some(amend)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let item = json!({"resident": "r0", "amendment": {"action": "add", "name": "Soap", "typicalPrice": 500}, "at": t});
    let (s, v) = call(&app, "POST", "/houses/sage/buy-list/amendments", Some(item)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let chore = json!({"resident": "r0", "amendment": {"action": "add", "name": "Garden"}, "at": t});
    let (s, v) = call(&app, "POST", "/houses/sage/chores/amendments", Some(chore)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
}

#[tokio::test]
async fn exemptions_and_roster() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, true, None));
    seed(&app).await;
    let t = april() + MS_PER_HOUR;
    let ex = json!({"resident": "r0", "fromDay": "2024-04-11", "toDay": "2024-04-20", "at": t});
    assert_eq!(call(&app, "POST", "/houses/sage/exemptions", Some(ex)).await.0, StatusCode::CREATED);
    let bad = json!({"resident": "r0", "fromDay": "2024-04-20", "toDay": "2024-04-11", "at": t});
    assert_eq!(call(&app, "POST", "/houses/sage/exemptions", Some(bad)).await.1["error"], "InvalidRange");
    let (_, stmts) = call(&app, "GET", "/houses/sage/obligations/2024-04", None).await;
    let r0 = stmts.as_array().unwrap().iter().find(|s| s["resident"] == "r0").unwrap();
    assert!((r0["owedPoints"].as_f64().unwrap() - 100.0 * 20.0 / 30.0).abs() < 1e-9);

    let (s, _) = call(&app, "DELETE", &format!("/houses/sage/residents/r4?at={t}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = call(&app, "POST", "/houses/sage/residents", Some(json!({"resident": "r0", "at": t}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("DuplicateResident")));
    let (s, v) = call(&app, "POST", "/houses/sage/residents", Some(json!({"resident": "r9", "at": 5}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::CONFLICT, Some("ClockRegression")));
    let (_, house) = call(&app, "GET", "/houses/sage", None).await;
    assert_eq!(house["activeResidents"].as_array().unwrap().len(), 4);
    let (s, v) = call(&app, "POST", "/houses/sage/residents", Some(json!({"nope": 1}))).await;
    assert_eq!((s, v["error"].as_str()), (StatusCode::BAD_REQUEST, Some("BadRequest")));
}

#[tokio::test]
async fn api_key_guards_house_routes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, false, Some("s3cret")));
    assert_eq!(send(&app, "GET", "/health", None, None).await.0, StatusCode::OK);
    assert_eq!(send(&app, "POST", "/houses", Some(json!({"id": "h"})), None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(send(&app, "POST", "/houses", Some(json!({"id": "h"})), Some("wrong")).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(send(&app, "POST", "/houses", Some(json!({"id": "h"})), Some("s3cret")).await.0, StatusCode::CREATED);
    assert_eq!(send(&app, "GET", "/houses/h/hearts", None, Some("s3cret")).await.0, StatusCode::OK);
}

#[tokio::test]
async fn reads_are_pure_functions_of_log_and_at() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, true, None));
    seed(&app).await;
    let uri = format!("/houses/sage/chores?at={}", april() + 30 * MS_PER_HOUR);
    let a = send(&app, "GET", &uri, None, None).await;
    let b = send(&app, "GET", &uri, None, None).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn restart_replays_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cfg(&dir, true, None);
    let t = april() + 30 * MS_PER_HOUR;
    let before = {
        let app = app(&cfg);
        seed(&app).await;
        call(&app, "POST", "/houses/sage/chores/1/claim", Some(json!({"resident": "r2", "at": t}))).await;
        call(&app, "POST", "/houses/sage/karma", Some(json!({"giver": "r0", "recipient": "r3", "at": t}))).await;
        send(&app, "GET", &format!("/houses/sage/chores?at={t}"), None, None).await
    };

    // A write that died half-way: no trailing newline, never acknowledged.
    let path = cfg.store.clone();
    let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"seq":999,"at":1,"house":"sage","kind":"Resid"#).unwrap();
    drop(f);

    let state = open(&cfg, Arc::new(ManualClock::new(Timestamp(0)))).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.ends_with(b"\n"), "torn tail truncated");
    let durable = read_ndjson(&bytes[..]).unwrap();
    assert_eq!(replay(&durable).unwrap(), state.snapshot().state);

    let app = router(state);
    assert_eq!(send(&app, "GET", &format!("/houses/sage/chores?at={t}"), None, None).await, before);
    // And the restarted service keeps appending where it left off.
    let (s, _) = call(&app, "POST", "/houses/sage/karma", Some(json!({"giver": "r1", "recipient": "r3", "at": t}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let again = read_ndjson(&std::fs::read(&path).unwrap()[..]).unwrap();
    assert_eq!(again.len(), durable.len() + 1);
}

#[tokio::test]
async fn event_export_is_the_house_log() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(&cfg(&dir, true, None));
    seed(&app).await;
    let (s, body) = send(&app, "GET", "/houses/sage/events", None, None).await;
    assert_eq!(s, StatusCode::OK);
    let events = read_ndjson(body.as_bytes()).unwrap();
    assert_eq!(events[0].body.kind_name(), "HouseCreated");
    assert_eq!(events.len(), std::fs::read_to_string(dir.path().join("log.ndjson")).unwrap().lines().count());
}

#[test]
fn malformed_config_names_the_field() {
    let err = ServiceConfig::from_toml("[house_defaults.windows]\nclaim_hours = -3\n").unwrap_err();
    assert!(err.to_string().contains("house_defaults.windows.claim_hours"), "{err}");
}
