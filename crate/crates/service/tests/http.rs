use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tabassist_core::eval::Task;
use tabassist_core::index::{load_manifest, Bm25Params, SearchField};
use tabassist_core::kb::KbFiles;
use tabassist_core::normalize_label;
use tabassist_core::pipeline::build_index_dir;
use tabassist_service::{router, suggest, AppState, ServiceConfig, SnapshotError, SnapshotSource, SuggestRequest};
use tabassist_testkit::golden_world;
use tempfile::TempDir;
use tower::ServiceExt;

struct Fixture {
    _dir: TempDir,
    source: SnapshotSource,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, kb) = golden_world().write_files(dir.path()).unwrap();
    let index_dir = dir.path().join("index");
    build_index_dir(&corpus, &KbFiles::locate(&kb, None), &[], Bm25Params::default(), &index_dir).unwrap();
    let source = SnapshotSource::new(&index_dir, &kb);
    Fixture { _dir: dir, source }
}

fn loaded_state(f: &Fixture, config: ServiceConfig) -> Arc<AppState> {
    let state = AppState::new(Some(f.source.clone()), config);
    state.snapshots.install(f.source.load(1).unwrap());
    state
}

async fn call(app: &Router, method: &str, path: &str, body: &str) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(path)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn ids(body: &Value) -> Vec<String> {
    body["suggestions"].as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap().to_string()).collect()
}

fn without_timing(mut body: Value) -> Value {
    body.as_object_mut().unwrap().remove("timing_ms").expect("timing field present");
    body
}

#[tokio::test]
async fn row_suggestions_exclude_seeds_and_repeat_exactly() {
    let f = fixture();
    let state = loaded_state(&f, ServiceConfig::default());
    let app = router(Arc::clone(&state));
    let body =
        json!({"caption": "list national table", "entities": ["Q0_04", "Q0_01"], "labels": ["Name"], "top_k": 5});
    let (status, first) = call(&app, "POST", "/suggest/rows", &body.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    let got = ids(&first);
    assert!(!got.is_empty() && got.len() <= 5);
    assert!(got.iter().all(|e| e != "Q0_04" && e != "Q0_01"));
    let scores: Vec<f64> =
        first["suggestions"].as_array().unwrap().iter().map(|s| s["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    assert!(first["suggestions"][0]["components"]["esim"].is_number());

    let (_, second) = call(&app, "POST", "/suggest/rows", &body.to_string()).await;
    assert_eq!(without_timing(first.clone()), without_timing(second));

    let req: SuggestRequest = serde_json::from_value(body).unwrap();
    let snapshot = state.snapshots.current().unwrap();
    let direct = suggest(&snapshot.engine, Task::Rows, &req, 500).unwrap();
    assert_eq!(first["suggestions"], serde_json::to_value(direct).unwrap(), "HTTP and library paths agree");
}

#[tokio::test]
async fn seed_labels_never_come_back_as_column_suggestions() {
    let f = fixture();
    let app = router(loaded_state(&f, ServiceConfig::default()));
    let body = json!({"caption": "list national table", "entities": ["Q0_04"], "labels": ["  Year ", "Name"]});
    let (status, resp) = call(&app, "POST", "/suggest/columns", &body.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{resp}");
    let got = ids(&resp);
    assert!(!got.is_empty());
    assert!(!got.iter().any(|l| l == "year" || l == "name"));
    for method in ["bridge", "baseline"] {
        let body = json!({"labels": ["year"], "method": method, "top_k": 50});
        let (status, resp) = call(&app, "POST", "/suggest/columns", &body.to_string()).await;
        assert_eq!(status, StatusCode::OK);
        assert!(!ids(&resp).iter().any(|l| l == "year"), "{method}");
    }
}

#[tokio::test]
async fn caption_only_column_requests_draw_on_caption_matched_tables() {
    let f = fixture();
    let state = loaded_state(&f, ServiceConfig::default());
    let app = router(Arc::clone(&state));
    let caption = "list national table";
    let body = json!({"caption": caption, "components": ["caption"], "candidate_k": {"caption": 256}});
    let (status, resp) = call(&app, "POST", "/suggest/columns", &body.to_string()).await;
    assert_eq!(status, StatusCode::OK, "{resp}");
    let got = ids(&resp);
    assert!(!got.is_empty());

    let snapshot = state.snapshots.current().unwrap();
    let index = &snapshot.engine.index;
    let matched: BTreeSet<String> = index
        .search(SearchField::Caption, &[caption], 256)
        .into_iter()
        .flat_map(|hit| {
            let t = index.table_idx(&hit.table_id).unwrap();
            index.table_labels(t).iter().map(|&l| index.label(l).to_string()).collect::<Vec<_>>()
        })
        .collect();
    for label in &got {
        assert!(matched.contains(label), "{label} not from a caption-matched table");
        assert_eq!(normalize_label(label).as_str(), label);
    }
}

#[tokio::test]
async fn invalid_requests_map_to_client_errors() {
    let f = fixture();
    let app = router(loaded_state(&f, ServiceConfig::default()));
    let unprocessable = [
        ("/suggest/rows", r#"{"entities": ["Q0_04"], "lambda_e": 1.5}"#),
        ("/suggest/rows", r#"{"top_k": 0}"#),
        ("/suggest/rows", r#"{"top_k": 501}"#),
        ("/suggest/rows", r#"{"entities": ["Q0_04", "Q0_04"]}"#),
        ("/suggest/rows", r#"{"task": "columns"}"#),
        ("/suggest/columns", r#"{"labels": ["year"], "components": ["caption", "vibes"]}"#),
        ("/suggest/columns", r#"{"method": "magic"}"#),
    ];
    for (path, body) in unprocessable {
        let (status, resp) = call(&app, "POST", path, body).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{path} {body}");
        assert!(resp["error"].is_string());
    }
    let malformed = ["", "{", "[1, 2]", r#"{"entities": "Q0_04"}"#, r#"{"lamda_e": 0.5}"#, r#"{"top_k": -3}"#];
    for body in malformed {
        let (status, resp) = call(&app, "POST", "/suggest/rows", body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body:?}");
        assert!(resp["error"].is_string());
    }
}

#[tokio::test]
async fn requests_before_the_first_snapshot_get_503() {
    let f = fixture();
    let app = router(AppState::new(Some(f.source.clone()), ServiceConfig::default()));
    let (status, _) = call(&app, "POST", "/suggest/rows", r#"{"entities": ["Q0_04"]}"#).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, health) = call(&app, "GET", "/health", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health["status"], "empty");
}

#[tokio::test]
async fn snapshot_reports_the_on_disk_manifest_and_reload_state() {
    let f = fixture();
    let state = loaded_state(&f, ServiceConfig::default());
    let app = router(Arc::clone(&state));
    let on_disk = load_manifest(&f.source.index_dir).unwrap();

    let (status, snap) = call(&app, "GET", "/snapshot", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snap["current"]["manifest"], serde_json::to_value(&on_disk).unwrap());
    assert_eq!(snap["current"]["manifest"]["corpus_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(snap["current"]["kb_sha256"], on_disk.kb_sha256.as_str());
    assert!(snap["loading"].is_null());

    let ticket = state.snapshots.begin_reload().unwrap();
    let (status, health) = call(&app, "GET", "/health", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(health["snapshot_version"], 1);
    let (_, snap) = call(&app, "GET", "/snapshot", "").await;
    assert_eq!(snap["current"]["version"], 1);
    assert_eq!(snap["loading"], ticket.version);
    let (status, _) = call(&app, "POST", "/admin/reload", "").await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", "/suggest/rows", r#"{"entities": ["Q0_04"]}"#).await;
    assert_eq!(status, StatusCode::OK, "old snapshot keeps serving during a reload");
    let version = ticket.version;
    state.snapshots.finish_reload(ticket, f.source.load(version));

    let (_, snap) = call(&app, "GET", "/snapshot", "").await;
    assert_eq!(snap["current"]["version"], version);
    assert!(snap["loading"].is_null());
}

#[tokio::test]
async fn admin_reload_swaps_in_a_new_version() {
    let f = fixture();
    let state = loaded_state(&f, ServiceConfig::default());
    let app = router(Arc::clone(&state));
    let (status, resp) = call(&app, "POST", "/admin/reload", "").await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let target = resp["loading_version"].as_u64().unwrap();
    for _ in 0..200 {
        if state.snapshots.status().loading.is_none() {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let status = state.snapshots.status();
    assert_eq!(status.current.unwrap().version, target);
    assert!(status.last_error.is_none());
}

#[tokio::test]
async fn recorded_requests_replay_byte_identically_on_a_fresh_snapshot() {
    let f = fixture();
    let recorded = [
        ("/suggest/rows", json!({"caption": "list national table", "entities": ["Q0_04"], "labels": ["Name"]})),
        ("/suggest/rows", json!({"entities": ["Q1_02", "Q1_05"], "kb_similarity": "wlm", "lambda_e": 0.2})),
        ("/suggest/rows", json!({"caption": "national", "components": ["caption"]})),
        ("/suggest/columns", json!({"caption": "list national table", "labels": ["Name", "Rank"]})),
        ("/suggest/columns", json!({"labels": ["Date"], "method": "baseline"})),
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let app = router(loaded_state(&f, ServiceConfig::default()));
        let mut bodies = Vec::new();
        for (path, body) in &recorded {
            let (status, resp) = call(&app, "POST", path, &body.to_string()).await;
            assert_eq!(status, StatusCode::OK);
            bodies.push(serde_json::to_vec(&resp["suggestions"]).unwrap());
        }
        runs.push(bodies);
    }
    assert_eq!(runs[0], runs[1]);
}

#[tokio::test]
async fn cors_allows_only_listed_origins() {
    let f = fixture();
    let config = ServiceConfig { cors_allowlist: vec!["http://localhost:5173".into()], ..Default::default() };
    let app = router(loaded_state(&f, config));
    for (origin, allowed) in [("http://localhost:5173", true), ("http://evil.example", false)] {
        let req = Request::builder().uri("/health").header("origin", origin).body(Body::empty()).unwrap();
        let resp = app.clone().oneshot(req).await.unwrap();
        assert_eq!(resp.headers().contains_key("access-control-allow-origin"), allowed, "{origin}");
    }
}

#[test]
fn mismatched_kb_is_refused() {
    let f = fixture();
    let other = f._dir.path().join("other.jsonl");
    std::fs::write(&other, "{\"id\": \"Only\"}\n").unwrap();
    let source = SnapshotSource { kb: KbFiles::locate(&other, None), ..f.source.clone() };
    assert!(matches!(source.load(1), Err(SnapshotError::KbMismatch { .. })));
}
