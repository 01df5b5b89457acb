use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use iqbench::builtin::{Opponent, TicTacToeWorld};
use iqbench::rng::Stream;
use iqbench::session::http::router;
use iqbench::session::SessionStore;
use iqbench::world::{run_games, ActionId, Agent, LifeConfig, Observation};

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

fn app() -> Router {
    router(Arc::new(SessionStore::new(None, None)))
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_and_step() {
    let app = app();
    let body = json!({"schema": "session/1", "world": {"kind": "oscillating"}, "games": 3, "max_steps_per_game": 2, "seed": 1});
    let (status, v) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["status"], "active");
    assert_eq!(v["step"], 0);
    assert_eq!(v["games_remaining"], 3);
    assert_eq!(v["running_success"], Value::Null);
    let id = v["id"].as_str().unwrap();

    let (status, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/actions"),
        Some(json!({"action": 0, "step": 0})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["step"], 1);
    assert_eq!(v["applied"]["step"], 0);
    assert_eq!(v["applied"]["game"]["outcome"], "win");
    assert_eq!(v["running_success"], 1.0);

    let (status, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["history"].as_array().unwrap().len(), 1);
    assert_eq!(v["games"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn error_codes() {
    let app = app();
    let id = create(
        &app,
        json!({"world": {"kind": "oscillating"}, "games": 2, "max_steps_per_game": 2, "seed": 1}),
    )
    .await;
    let act = format!("/sessions/{id}/actions");

    let (status, v) = call(&app, "POST", &act, Some(json!({"action": 5, "step": 0}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "action_out_of_range");

    call(&app, "POST", &act, Some(json!({"action": 0, "step": 0}))).await;
    let (status, v) = call(&app, "POST", &act, Some(json!({"action": 0, "step": 0}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "step_conflict");

    let (status, v) = call(&app, "POST", &act, Some(json!({"action": "x", "step": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_request");

    let (status, v) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "session_not_found");

    let (status, v) = call(&app, "GET", "/elsewhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "route_not_found");

    let (status, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"world": {"kind": "chess"}, "seed": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "unknown_world_spec");

    let (status, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"world": {"kind": "oscillating"}})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_request");

    let (status, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"world": {"kind": "oscillating"}, "games": 0, "seed": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_config");

    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/finish"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "finished");
    let (status, v) = call(&app, "POST", &act, Some(json!({"action": 0, "step": 1}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "session_finished");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_double_submit_applies_once() {
    let app = app();
    for round in 0..20 {
        let id = create(&app, json!({"world": {"kind": "tictactoe"}, "games": 2, "max_steps_per_game": 9, "seed": round})).await;
        let act = format!("/sessions/{id}/actions");
        let body = json!({"action": 4, "step": 0});
        let (a, b) = tokio::join!(
            call(&app, "POST", &act, Some(body.clone())),
            call(&app, "POST", &act, Some(body))
        );
        let mut codes = [a.0, b.0];
        codes.sort();
        assert_eq!(codes, [StatusCode::OK, StatusCode::CONFLICT]);
        let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(v["step"], 1);
        assert_eq!(v["history"].as_array().unwrap().len(), 1);
    }
}

/// Replays a recorded action list.
struct Replay(Vec<usize>);

impl Agent for Replay {
    fn act(&mut self, _: Observation, _: &mut Stream) -> ActionId {
        ActionId(self.0.remove(0))
    }
}

/// A full nine-game session scores the same as the batch runner given the
/// same actions, and finish reports both baselines.
#[tokio::test]
async fn full_tictactoe_session_matches_batch_scoring() {
    let app = app();
    let seed = 17u64;
    let id = create(&app, json!({"world": {"kind": "tictactoe", "opponent": "uniform_random"}, "games": 9, "max_steps_per_game": 9, "seed": seed})).await;
    let act = format!("/sessions/{id}/actions");
    let mut actions = Vec::new();
    let mut step = 0u64;
    loop {
        // Steps through the cells five apart; a taken cell forfeits.
        let a = ((step * 5) % 9) as usize;
        let (status, v) = call(&app, "POST", &act, Some(json!({"action": a, "step": step}))).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        actions.push(a);
        step += 1;
        if v["status"] == "finished" {
            break;
        }
    }
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/finish"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["games"].as_array().unwrap().len(), 9);

    let config = LifeConfig::new(9, 9).unwrap();
    let games = run_games(
        &mut TicTacToeWorld::new(Opponent::UniformRandom),
        &mut Replay(actions),
        config,
        seed,
    )
    .unwrap();
    let half: u32 = games.iter().map(|g| g.outcome.half_points()).sum();
    let want = f64::from(half) / 18.0;
    assert_eq!(v["success"].as_f64().unwrap(), want);
    let names: Vec<&str> = v["games"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["outcome"].as_str().unwrap())
        .collect();
    let expected: Vec<&str> = games.iter().map(|g| g.outcome.name()).collect();
    assert_eq!(names, expected);
    for key in ["random", "dead"] {
        let b = v["baselines"][key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&b));
    }
}

#[tokio::test]
async fn journal_replays_after_restart() {
    let dir = tempfile::tempdir().unwrap();
    let first = Arc::new(SessionStore::new(Some(dir.path().to_path_buf()), None));
    let app = router(first);
    let id = create(&app, json!({"world": {"kind": "bitstream", "source": "alternating"}, "games": 4, "max_steps_per_game": 3, "seed": 9})).await;
    for (step, a) in [1usize, 0, 1].into_iter().enumerate() {
        let (status, _) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/actions"),
            Some(json!({"action": a, "step": step})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}"), None).await;

    let second = Arc::new(SessionStore::new(Some(dir.path().to_path_buf()), None));
    assert_eq!(second.recover().unwrap(), 1);
    let app = router(second);
    let (status, after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/actions"),
        Some(json!({"action": 0, "step": 3})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
}
