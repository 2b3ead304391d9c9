use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use laughtts::dsp::{save_wav, Waveform};
use laughtts::eval::{mos_stats, read_rating_log, Method};
use mos_service::{router, session_permutation, AppState, SampleSet, ServiceConfig, ADMIN_HEADER, RATINGS_FILE};
use serde_json::{json, Value};
use tower::ServiceExt;

const ADMIN: &str = "admin-secret";

fn write_samples(dir: &Path, n: usize) -> SampleSet {
    let mut entries = Vec::new();
    let wave = Waveform::new(vec![0.1f32; 800], 16000).unwrap();
    for i in 0..n {
        let method = Method::ALL[i % 4];
        let path = dir.join(format!("{method}_{i:03}.wav"));
        save_wav(&path, &wave).unwrap();
        entries.push((format!("{method}_{i:03}"), method, path));
    }
    SampleSet::new(entries, 11).unwrap()
}

fn open(dir: &Path, n: usize, cap: Option<usize>) -> Arc<AppState> {
    let config = ServiceConfig {
        store_dir: dir.join("store"),
        admin_token: ADMIN.into(),
        server_seed: 11,
        max_samples_per_session: cap,
        ..ServiceConfig::default()
    };
    AppState::open(config, write_samples(dir, n)).unwrap()
}

async fn call(state: &Arc<AppState>, method: &str, uri: &str, body: Option<Value>, admin: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(a) = admin {
        req = req.header(ADMIN_HEADER, a);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn new_session(state: &Arc<AppState>, gender: &str, age: &str) -> String {
    let (st, v) = call(state, "POST", "/api/session", Some(json!({"gender": gender, "age_range": age})), None).await;
    assert_eq!(st, StatusCode::OK, "{v}");
    v["token"].as_str().unwrap().to_string()
}

async fn rate(state: &Arc<AppState>, token: &str, sample: &str, score: i64) -> (StatusCode, Value) {
    call(state, "POST", &format!("/api/session/{token}/rating"), Some(json!({"sample_id": sample, "score": score})), None).await
}

async fn next(state: &Arc<AppState>, token: &str) -> Value {
    let (st, v) = call(state, "GET", &format!("/api/session/{token}/next"), None, None).await;
    assert_eq!(st, StatusCode::OK);
    v
}

fn store_len(dir: &Path) -> usize {
    read_rating_log(&std::fs::read_to_string(dir.join("store").join(RATINGS_FILE)).unwrap()).unwrap().len()
}

#[tokio::test]
async fn full_session_flow() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 6, None);
    let token = new_session(&state, "female", "20-40").await;
    let first = next(&state, &token).await;
    assert_eq!(first, next(&state, &token).await, "next is idempotent");
    assert_eq!(first["index"], 0);
    assert_eq!(first["total"], 6);

    let sid = first["sample_id"].as_str().unwrap().to_string();
    let (st, _) = rate(&state, &token, &sid, 6).await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(store_len(dir.path()), 0);

    let (st, v) = rate(&state, &token, &sid, 3).await;
    assert_eq!((st, v["ok"].clone()), (StatusCode::OK, json!(true)));
    assert_eq!(store_len(dir.path()), 1);
    let (st, v) = rate(&state, &token, &sid, 3).await;
    assert_eq!((st, v["duplicate"].clone()), (StatusCode::OK, json!(true)));
    assert_eq!(store_len(dir.path()), 1);

    let current = next(&state, &token).await;
    let (st, v) = rate(&state, &token, "0000000000000000", 4).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["current"], current);

    for _ in 1..6 {
        let n = next(&state, &token).await;
        let (st, _) = rate(&state, &token, n["sample_id"].as_str().unwrap(), 5).await;
        assert_eq!(st, StatusCode::OK);
    }
    assert_eq!(next(&state, &token).await["done"], json!(true));
    assert_eq!(store_len(dir.path()), 6);

    let (st, _) = call(&state, "GET", "/api/session/nope/next", None, None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_metadata_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 4, None);
    let (st, _) = call(&state, "POST", "/api/session", Some(json!({"gender": "female", "age_range": "40-50"})), None).await;
    assert!(st.is_client_error());
    let (st, _) = call(&state, "POST", "/api/session", Some(json!({"gender": "robot", "age_range": "20-40"})), None).await;
    assert!(st.is_client_error());
}

#[tokio::test]
async fn acked_ratings_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 8, None);
    let token = new_session(&state, "male", "50-65").await;
    let mut rated = Vec::new();
    for _ in 0..3 {
        let n = next(&state, &token).await;
        let sid = n["sample_id"].as_str().unwrap().to_string();
        assert_eq!(rate(&state, &token, &sid, 4).await.0, StatusCode::OK);
        rated.push(sid);
    }
    let before = state.ratings();
    let resume = next(&state, &token).await;
    drop(state);

    let state = open(dir.path(), 8, None);
    assert_eq!(state.ratings(), before);
    assert_eq!(next(&state, &token).await, resume);
    // Already-acked sample stays idempotent after restart.
    let (st, v) = rate(&state, &token, &rated[0], 4).await;
    assert_eq!((st, v["duplicate"].clone()), (StatusCode::OK, json!(true)));
    assert_eq!(state.ratings().len(), 3);
}

#[tokio::test]
async fn participant_payloads_hide_methods() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 8, None);
    let token = new_session(&state, "other", "other").await;
    let mut bodies = vec![call(&state, "GET", "/api/instructions", None, None).await.1];
    loop {
        let n = next(&state, &token).await;
        bodies.push(n.clone());
        if n.get("done").is_some() {
            break;
        }
        let sid = n["sample_id"].as_str().unwrap().to_string();
        bodies.push(rate(&state, &token, &sid, 2).await.1);
        let (st, _) = call(&state, "GET", &format!("/audio/{sid}"), None, None).await;
        assert_eq!(st, StatusCode::OK);
    }
    for body in bodies {
        let text = body.to_string().to_lowercase();
        for m in Method::ALL {
            assert!(!text.contains(m.label()), "{text} leaks {m}");
        }
        assert!(!text.contains("method"), "{text}");
        assert!(!text.contains("seq2seq") && !text.contains("melgan"), "{text}");
    }
}

#[tokio::test]
async fn instructions_carry_scale_labels() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 4, None);
    let (_, v) = call(&state, "GET", "/api/instructions", None, None).await;
    let labels: Vec<&str> = v["scale"].as_array().unwrap().iter().map(|l| l["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["very unnatural", "unnatural", "fairly natural", "natural", "very natural"]);
    assert!(v["naturalness"].as_str().unwrap().contains("human"));
}

#[tokio::test]
async fn sessions_get_distinct_permutations() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 12, None);
    let mut orders = Vec::new();
    for _ in 0..20 {
        let token = new_session(&state, "female", "20-40").await;
        let mut order = Vec::new();
        loop {
            let n = next(&state, &token).await;
            let Some(sid) = n["sample_id"].as_str().map(str::to_string) else { break };
            rate(&state, &token, &sid, 3).await;
            order.push(sid);
        }
        let mut sorted = order.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 12, "each sample exactly once");
        orders.push(order);
    }
    for i in 0..orders.len() {
        for j in i + 1..orders.len() {
            assert_ne!(orders[i], orders[j]);
        }
    }
}

#[test]
fn permutations_are_uniform() {
    let n = 10;
    let sessions = 2000;
    let mut first = vec![0usize; n];
    let mut last = vec![0usize; n];
    for i in 0..sessions {
        let order = session_permutation(&mos_service::sha256_hex(format!("token-{i}").as_bytes()), 11, n, None);
        first[order[0]] += 1;
        last[order[n - 1]] += 1;
    }
    let expected = sessions as f64 / n as f64;
    // 95th percentile of chi-square with 9 degrees of freedom.
    let critical = 16.919;
    for counts in [first, last] {
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < critical, "chi2 {chi2} for {counts:?}");
    }
}

#[tokio::test]
async fn session_cap_limits_presentation() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 10, Some(3));
    let (_, v) = call(&state, "POST", "/api/session", Some(json!({"gender": "male", "age_range": "20-40"})), None).await;
    assert_eq!(v["n_samples"], 3);
}

#[tokio::test]
async fn results_require_admin_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 8, None);
    let (st, _) = call(&state, "GET", "/api/results", None, None).await;
    assert_eq!(st, StatusCode::UNAUTHORIZED);
    let (st, _) = call(&state, "GET", "/api/results", None, Some("wrong")).await;
    assert_eq!(st, StatusCode::UNAUTHORIZED);

    let (st, empty) = call(&state, "GET", "/api/results", None, Some(ADMIN)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(empty["stats"], json!([]));
    assert_eq!(empty["participants"]["total"]["sum"], 0);

    // Participant mix shaped like the reported listening test.
    let groups = [("female", "20-40", 7), ("male", "20-40", 13), ("female", "50-65", 1), ("male", "50-65", 3)];
    let mut k = 0;
    for (g, a, count) in groups {
        for _ in 0..count {
            let token = new_session(&state, g, a).await;
            for _ in 0..3 {
                let n = next(&state, &token).await;
                k += 1;
                rate(&state, &token, n["sample_id"].as_str().unwrap(), 1 + (k % 5)).await;
            }
        }
    }
    let (_, res) = call(&state, "GET", "/api/results", None, Some(ADMIN)).await;
    let total = &res["participants"]["total"];
    assert_eq!((total["female"].clone(), total["male"].clone(), total["sum"].clone()), (json!(8), json!(16), json!(24)));
    let rows = res["participants"]["rows"].as_array().unwrap();
    assert_eq!(rows[0]["sum"], 20);
    assert_eq!(rows[1]["sum"], 4);
    assert_eq!(res["n_ratings"], 72);

    let offline = read_rating_log(&std::fs::read_to_string(dir.path().join("store").join(RATINGS_FILE)).unwrap()).unwrap();
    let expected = serde_json::to_value(mos_stats(&offline).unwrap()).unwrap();
    assert_eq!(res["stats"], expected);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_keep_store_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let state = open(dir.path(), 6, None);
    let mut handles = Vec::new();
    for _ in 0..8 {
        let state = state.clone();
        handles.push(tokio::spawn(async move {
            let token = new_session(&state, "female", "20-40").await;
            for _ in 0..6 {
                let n = next(&state, &token).await;
                let sid = n["sample_id"].as_str().unwrap().to_string();
                // Retries race with the first submission.
                let (a, b) = tokio::join!(rate(&state, &token, &sid, 4), rate(&state, &token, &sid, 4));
                assert!(a.0 == StatusCode::OK || b.0 == StatusCode::OK);
            }
        }));
    }
    for h in handles {
        h.await.unwrap();
    }
    assert_eq!(store_len(dir.path()), 48);
    assert_eq!(state.ratings().len(), 48);
}
