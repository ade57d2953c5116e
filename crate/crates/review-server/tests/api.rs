use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use ontoforge::clock::Clock;
use ontoforge::review::ReviewStore;
use ontoforge_review::{router, ServerSettings};

fn app(dir: &std::path::Path) -> Router {
    let store = ReviewStore::open(dir, Clock::epoch()).unwrap();
    router(Arc::new(store), &ServerSettings::default())
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
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
    let value = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

fn three_items() -> Value {
    json!({
        "run_id": "r1",
        "triples": [
            {"subject": "sand casting", "object": "green sand mold", "relation": "uses", "doc": "d1"},
            {"subject": "ladle", "object": "bronze", "relation": "transfers", "doc": "d1"},
            {"subject": "gas porosity", "object": "hydrogen", "relation": "caused by", "doc": "d2"}
        ],
        "documents": {"d1": "Sand casting uses a green sand mold. The ladle transfers bronze.", "d2": "Gas porosity is caused by hydrogen."}
    })
}

#[tokio::test]
async fn review_flow_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());

    let (st, body) = call(&app, Method::POST, "/runs", Some(three_items())).await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    assert_eq!(body["stats"]["pending"], 3);
    let (st, _) = call(&app, Method::POST, "/runs", Some(three_items())).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let (st, body) = call(&app, Method::GET, "/runs", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["runs"][0]["run_id"], "r1");

    let (_, page) = call(
        &app,
        Method::GET,
        "/runs/r1/items?status=pending&page=1&page_size=2",
        None,
    )
    .await;
    assert_eq!(page["total"], 3);
    assert_eq!(page["items"].as_array().unwrap().len(), 2);
    assert!(page["items"][0]["context_excerpt"]
        .as_str()
        .unwrap()
        .contains("green sand mold"));

    let decide = |item: &str| format!("/runs/r1/items/{item}/decision");
    let (st, item) = call(
        &app,
        Method::POST,
        &decide("item-0001"),
        Some(json!({"action": "accept", "reviewer": "ana"})),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(item["status"], "accepted");
    let (st, _) = call(
        &app,
        Method::POST,
        &decide("item-0002"),
        Some(json!({"action": "reject", "reviewer": "ana"})),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    let edit = json!({"action": "edit", "reviewer": "ana",
        "edited_triple": {"subject": "gas porosity", "object": "dissolved hydrogen", "relation": "caused by"}});
    let (st, item) = call(&app, Method::POST, &decide("item-0003"), Some(edit)).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(item["edited_triple"]["object"], "dissolved hydrogen");

    let (st, _) = call(
        &app,
        Method::POST,
        &decide("item-0001"),
        Some(json!({"action": "reject", "reviewer": "bo"})),
    )
    .await;
    assert_eq!(st, StatusCode::CONFLICT);

    let (_, stats) = call(&app, Method::GET, "/runs/r1/stats", None).await;
    assert_eq!(
        (
            stats["accepted"].clone(),
            stats["rejected"].clone(),
            stats["edited"].clone()
        ),
        (json!(1), json!(1), json!(1))
    );
    assert!((stats["acceptance_rate"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);

    let (st, export) = call(&app, Method::GET, "/runs/r1/export?status=accepted", None).await;
    assert_eq!(st, StatusCode::OK);
    let objects: Vec<&str> = export["triples"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["object"].as_str().unwrap())
        .collect();
    assert_eq!(objects, ["green sand mold", "dissolved hydrogen"]);

    // A fresh router over the same directory sees every decision.
    let reopened = self::app(dir.path());
    let (_, page) = call(
        &reopened,
        Method::GET,
        "/runs/r1/items?status=pending",
        None,
    )
    .await;
    assert_eq!(page["total"], 0);
}

#[tokio::test]
async fn create_from_run_file_contents() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let run = concat!(
        r#"{"kind":"run","run_id":"icl-relations-00000000","strategy":"icl","task":"relations","dataset":"t","train_dataset":null,"#,
        r#""params":{"model":"m","k":2,"max_drift":0.25,"temperature":0.0,"max_output_tokens":64,"concurrency":1},"skipped":[],"#,
        r#""started_at":"1970-01-01T00:00:00Z","finished_at":"1970-01-01T00:00:00Z"}"#,
        "\n",
        r#"{"kind":"prediction","doc":"d1","triples":[{"subject":"ladle","object":"bronze","relation":"transfers","doc":"d1"}],"request_hash":"x"}"#,
        "\n"
    );
    let dataset = "{\"kind\":\"doc\",\"id\":\"d1\",\"text\":\"The ladle transfers bronze.\"}\n";
    let (st, body) = call(
        &app,
        Method::POST,
        "/runs",
        Some(json!({"run_id": "from-file", "run": run, "dataset": dataset})),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED, "{body}");
    assert_eq!(body["stats"]["total"], 1);
    let (_, page) = call(&app, Method::GET, "/runs/from-file/items", None).await;
    assert_eq!(
        page["items"][0]["context_excerpt"],
        "The ladle transfers bronze."
    );

    let (st, body) = call(
        &app,
        Method::POST,
        "/runs",
        Some(json!({"run_id": "bad", "run": "not json"})),
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("run file"));
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    call(&app, Method::POST, "/runs", Some(three_items())).await;

    let cases = [
        (Method::GET, "/runs/nope/stats", None, StatusCode::NOT_FOUND),
        (
            Method::GET,
            "/runs/r1/items?status=maybe",
            None,
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::GET,
            "/runs/r1/items?page=0",
            None,
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::GET,
            "/runs/r1/items?page_size=100000",
            None,
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::GET,
            "/runs/r1/export?status=rejected",
            None,
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::POST,
            "/runs/r1/items/item-0099/decision",
            Some(json!({"action": "accept", "reviewer": "a"})),
            StatusCode::NOT_FOUND,
        ),
        (
            Method::POST,
            "/runs/r1/items/item-0001/decision",
            Some(json!({"action": "approve", "reviewer": "a"})),
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::POST,
            "/runs/r1/items/item-0001/decision",
            Some(json!({"action": "accept", "reviewer": " "})),
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::POST,
            "/runs/r1/items/item-0001/decision",
            Some(json!({"action": "edit", "reviewer": "a",
            "edited_triple": {"subject": "", "object": "x", "relation": "y"}})),
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::POST,
            "/runs",
            Some(json!({"run_id": "../escape", "triples": []})),
            StatusCode::BAD_REQUEST,
        ),
    ];
    for (method, uri, body, want) in cases {
        let (st, resp) = call(&app, method.clone(), uri, body).await;
        assert_eq!(st, want, "{method} {uri}: {resp}");
        assert!(resp["error"].is_string(), "{uri}: {resp}");
    }
}

#[tokio::test]
async fn serves_ui_bundle_or_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let (st, body) = call(&app(dir.path()), Method::GET, "/", None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(body.as_str().unwrap().contains("/runs"));

    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<h1>review ui</h1>").unwrap();
    let store = ReviewStore::open(dir.path(), Clock::epoch()).unwrap();
    let settings = ServerSettings {
        ui_dir: Some(ui.path().to_path_buf()),
        ..ServerSettings::default()
    };
    let app = router(Arc::new(store), &settings);
    let (st, body) = call(&app, Method::GET, "/", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body, Value::String("<h1>review ui</h1>".into()));
    let (st, _) = call(&app, Method::GET, "/runs", None).await;
    assert_eq!(st, StatusCode::OK);
}
