use std::time::Duration;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use fts_core::cohort::{generate_synthetic_cohort, SyntheticSpec};
use fts_core::{run_simulation, SessionConfig, WeightVector};
use fts_service::{router, AppState, Catalog, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> (AppState, Router) {
    let state = AppState::new(Catalog::builtin(), &ServiceConfig::default());
    (state.clone(), router(state))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => builder
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = to_bytes(response.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

fn parse(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

async fn create(app: &Router, body: Value) -> String {
    let (status, bytes) = call(app, "POST", "/api/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&bytes));
    parse(&bytes)["session_id"].as_str().unwrap().to_string()
}

fn run_body(a: [f64; 5], b: [f64; 5], seed: u64) -> Value {
    let keyed = |w: [f64; 5]| {
        json!({
            "memory": w[0],
            "information_processing_speed": w[1],
            "reasoning": w[2],
            "attention": w[3],
            "behavioral_restraint": w[4],
        })
    };
    json!({ "weights_a": keyed(a), "weights_b": keyed(b), "master_seed": seed })
}

async fn wait_for_results(app: &Router, id: &str) -> (StatusCode, Vec<u8>) {
    for _ in 0..2400 {
        let (status, bytes) = call(app, "GET", &format!("/api/sessions/{id}/results"), None).await;
        if status != StatusCode::ACCEPTED {
            return (status, bytes);
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("session {id} never finished");
}

#[tokio::test(flavor = "multi_thread")]
async fn builtin_cohort_session_runs_to_a_schema_valid_document() {
    let (state, app) = app();
    let id = create(&app, json!({ "cohort": "synthetic-small" })).await;
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/run"),
        Some(run_body([1.0, 0.0, 3.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0, 1.0], 42)),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);

    let (status, first) = wait_for_results(&app, &id).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&first));
    let (_, second) = call(&app, "GET", &format!("/api/sessions/{id}/results"), None).await;
    assert_eq!(first, second, "repeated reads differ");

    let schema: Value = serde_json::from_str(fts_service::api::REPORT_SCHEMA_JSON).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let doc = parse(&first);
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
    let mut broken = doc.clone();
    broken["report"]["model_a"]["accuracy"] = json!(1.5);
    assert!(!validator.is_valid(&broken));
    let mut broken = doc.clone();
    broken.as_object_mut().unwrap().remove("warnings");
    assert!(!validator.is_valid(&broken));

    // the service adds nothing: same bytes as a direct engine run
    let cohort = state.catalog().get("synthetic-small").unwrap().cohort.clone();
    let config = SessionConfig::new(
        WeightVector::new([1.0, 0.0, 3.0, 0.0, 0.0]).unwrap(),
        WeightVector::new([0.0, 0.0, 0.0, 2.0, 1.0]).unwrap(),
        42,
    );
    assert_eq!(first, run_simulation(&cohort, &config).unwrap().to_json().into_bytes());
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_have_distinct_ids_and_unknown_cohorts_are_404() {
    let (_, app) = app();
    let a = create(&app, json!({ "cohort": "synthetic-small" })).await;
    let b = create(&app, json!({ "cohort": "synthetic-small" })).await;
    assert_ne!(a, b);

    let (status, bytes) = call(&app, "POST", "/api/sessions", Some(json!({ "cohort": "nope" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(parse(&bytes)["error"]["kind"], "UnknownCohort");

    let (status, _) = call(&app, "POST", "/api/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn upload_missing_a_column_names_the_column() {
    let (_, app) = app();
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(10), 1).unwrap();
    let csv: String = cohort
        .to_csv()
        .lines()
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            fields.remove(10); // trail_making_a
            fields.join(",") + "\n"
        })
        .collect();
    let (status, bytes) = call(&app, "POST", "/api/sessions", Some(json!({ "cohort_csv": csv }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body = parse(&bytes);
    assert_eq!(body["error"]["kind"], "MissingColumn");
    assert_eq!(body["error"]["column"], "trail_making_a");
}

#[tokio::test(flavor = "multi_thread")]
async fn uploaded_cohort_matches_the_engine() {
    let (_, app) = app();
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(150), 9).unwrap();
    let id = create(&app, json!({ "cohort_csv": cohort.to_csv() })).await;
    call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/run"),
        Some(run_body([1.0; 5], [0.0, 1.0, 0.0, 0.0, 0.0], 3)),
    )
    .await;
    let (status, bytes) = wait_for_results(&app, &id).await;
    assert_eq!(status, StatusCode::OK);
    let config = SessionConfig::new(WeightVector::equal(), WeightVector::new([0.0, 1.0, 0.0, 0.0, 0.0]).unwrap(), 3);
    assert_eq!(bytes, run_simulation(&cohort, &config).unwrap().to_json().into_bytes());
}

#[tokio::test(flavor = "multi_thread")]
async fn run_errors_map_to_status_codes() {
    let (state, app) = app();
    let (status, bytes) = call(
        &app,
        "POST",
        "/api/sessions/nope/run",
        Some(run_body([1.0; 5], [1.0; 5], 1)),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(parse(&bytes)["error"]["kind"], "UnknownSession");

    let id = create(&app, json!({ "cohort": "synthetic-small" })).await;
    let (status, bytes) = call(
        &app,
        "POST",
        &format!("/api/sessions/{id}/run"),
        Some(run_body([0.0; 5], [1.0; 5], 1)),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body = parse(&bytes);
    assert_eq!(body["error"]["kind"], "InvalidWeights");
    assert_eq!(body["error"]["field"], "weights_a");

    let mut bad_policy = run_body([1.0; 5], [1.0; 5], 1);
    bad_policy["policy"] = json!({ "percentile_cut": 2.0 });
    let (status, bytes) = call(&app, "POST", &format!("/api/sessions/{id}/run"), Some(bad_policy)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(parse(&bytes)["error"]["field"], "policy");

    // a new session has nothing to report yet
    let (status, _) = call(&app, "GET", &format!("/api/sessions/{id}/results"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    // hold the worker pool so the run stays queued
    let hold = state.hold_workers().await;
    let url = format!("/api/sessions/{id}/run");
    let (status, _) = call(&app, "POST", &url, Some(run_body([1.0; 5], [1.0; 5], 1))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, bytes) = call(&app, "POST", &url, Some(run_body([1.0; 5], [1.0; 5], 2))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(parse(&bytes)["error"]["kind"], "Conflict");

    let (status, bytes) = call(&app, "GET", &format!("/api/sessions/{id}/results"), None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let body = parse(&bytes);
    assert_eq!(body["state"], "running");
    assert!(body.get("report").is_none() && body.get("models").is_none());
    drop(hold);

    let (status, _) = wait_for_results(&app, &id).await;
    assert_eq!(status, StatusCode::OK);
    // a done session can be configured and run again
    let (status, _) = call(&app, "POST", &url, Some(run_body([1.0; 5], [2.0; 5], 7))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, bytes) = wait_for_results(&app, &id).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse(&bytes)["config"]["master_seed"], 7);
}

#[tokio::test(flavor = "multi_thread")]
async fn failed_runs_report_a_structured_error() {
    let (_, app) = app();
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default().with_size(10), 1).unwrap();
    let id = create(&app, json!({ "cohort_csv": cohort.to_csv() })).await;
    // a 1% cut puts everyone in the top subset, so every label is 1
    let mut body = run_body([1.0; 5], [1.0; 5], 1);
    body["policy"] = json!({ "percentile_cut": 0.01 });
    let (status, _) = call(&app, "POST", &format!("/api/sessions/{id}/run"), Some(body)).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, bytes) = wait_for_results(&app, &id).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let body = parse(&bytes);
    assert_eq!(body["state"], "failed");
    assert_eq!(body["error"]["kind"], "EngineError");
    assert_eq!(body["error"]["stage"], "training");
    assert!(body["error"]["message"].as_str().unwrap().contains("training stage"));
}

#[tokio::test(flavor = "multi_thread")]
async fn unknown_session_results_are_404() {
    let (_, app) = app();
    let (status, bytes) = call(&app, "GET", "/api/sessions/does-not-exist/results", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(parse(&bytes)["error"]["session_id"], "does-not-exist");
}

#[tokio::test(flavor = "multi_thread")]
async fn cohorts_and_schema_are_published() {
    let (_, app) = app();
    let (status, bytes) = call(&app, "GET", "/api/cohorts", None).await;
    assert_eq!(status, StatusCode::OK);
    let body = parse(&bytes);
    let names: Vec<&str> = body["cohorts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["synthetic-default", "synthetic-reasoning-gap", "synthetic-small"]);
    assert_eq!(body["cohorts"][0]["size"], 2000);

    let (status, bytes) = call(&app, "GET", "/api/schema/report", None).await;
    assert_eq!(status, StatusCode::OK);
    let on_disk = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/simulation_result.schema.json")).unwrap();
    assert_eq!(bytes, on_disk);
    assert_eq!(parse(&bytes)["$id"], "fts.simulation_result/v1");
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_sessions_do_not_interfere() {
    let (state, app) = app();
    let ids: Vec<String> = create_sessions(&app, 4).await;
    for (i, id) in ids.iter().enumerate() {
        let (status, _) = call(
            &app,
            "POST",
            &format!("/api/sessions/{id}/run"),
            Some(run_body([1.0 + i as f64, 1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0, 0.0], i as u64)),
        )
        .await;
        assert_eq!(status, StatusCode::ACCEPTED);
    }
    let cohort = state.catalog().get("synthetic-small").unwrap().cohort.clone();
    for (i, id) in ids.iter().enumerate() {
        let (status, bytes) = wait_for_results(&app, id).await;
        assert_eq!(status, StatusCode::OK);
        let config = SessionConfig::new(
            WeightVector::new([1.0 + i as f64, 1.0, 0.0, 0.0, 0.0]).unwrap(),
            WeightVector::only(fts_core::Trait::Reasoning),
            i as u64,
        );
        assert_eq!(bytes, run_simulation(&cohort, &config).unwrap().to_json().into_bytes());
    }
}

async fn create_sessions(app: &Router, n: usize) -> Vec<String> {
    let mut ids = Vec::new();
    for _ in 0..n {
        ids.push(create(app, json!({ "cohort": "synthetic-small" })).await);
    }
    ids
}
