use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qassist_service::{router, Registry};
use serde_json::{json, Value};
use tower::ServiceExt;

const SRS: &str = "\
The navigation camera shall capture images of the landing site at 10 hertz.

The propulsion subsystem shall limit the wet mass to 3004 kg.";

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn wait_ready(app: &Router, id: &str) -> Value {
    for _ in 0..200 {
        let (status, body) = call(app, "GET", &format!("/projects/{id}/status"), None).await;
        assert_eq!(status, StatusCode::OK);
        if body["status"]["state"] != "indexing" {
            return body;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("project {id} never finished indexing");
}

fn corpus() -> Value {
    json!({
        "domain": "space",
        "documents": [
            {"id": "Wet_mass", "title": "Wet mass", "text": "The wet mass of a spacecraft includes the propellant.\n\nThe dry mass excludes it."},
            {"id": "Star_tracker", "title": "Star tracker", "text": "A star tracker measures attitude from star positions."}
        ]
    })
}

#[tokio::test]
async fn health_reports_ok() {
    let app = router(Arc::new(Registry::in_memory()));
    let (status, body) = call(&app, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn project_lifecycle() {
    let app = router(Arc::new(Registry::in_memory()));
    let (status, created) = call(&app, "POST", "/projects", Some(json!({"name": "demo", "srs_text": SRS, "corpus": corpus()}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let id = created["id"].as_str().unwrap().to_string();
    assert_eq!(created["name"], "demo");

    let status_body = wait_ready(&app, &id).await;
    assert_eq!(status_body["status"], json!({"state": "ready", "passages": 2, "corpus_documents": 2}));

    let (status, answer) = call(
        &app,
        "POST",
        &format!("/projects/{id}/questions"),
        Some(json!({"question": "What shall the propulsion subsystem limit the wet mass to?", "k": 1})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(answer["srs_hits"].as_array().unwrap().len(), 1);
    assert_eq!(answer["srs_hits"][0]["answer"]["text"], "3004 kg");
    assert_eq!(answer["retrieved_doc_ids"], json!(["Wet_mass"]));

    let (status, p) = call(&app, "GET", &format!("/projects/{id}/passages/srs%230001"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(p["text"].as_str().unwrap().contains("3004 kg"));

    let (status, p) = call(&app, "GET", &format!("/projects/{id}/passages/Wet_mass%230001"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(p["source"], "corpus");
    assert_eq!(p["text"], "The dry mass excludes it.");
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let app = router(Arc::new(Registry::in_memory()));
    let (status, body) = call(&app, "GET", "/projects/p9999/status", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("p9999"));

    let (status, _) = call(&app, "POST", "/projects", Some(json!({"srs_text": "  \n\n "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/projects", Some(json!({"srs_text": SRS, "config": {"k": 0}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/projects", Some(json!({"text": SRS}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, created) = call(&app, "POST", "/projects", Some(json!({"srs_text": SRS}))).await;
    let id = created["id"].as_str().unwrap().to_string();
    wait_ready(&app, &id).await;
    let (status, _) = call(&app, "POST", &format!("/projects/{id}/questions"), Some(json!({"question": " "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", &format!("/projects/{id}/passages/nope%230003"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = call(&app, "POST", &format!("/projects/{id}/questions"), Some(json!({"question": "What is the wet mass?"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["corpus_missing"], true);
}

#[tokio::test]
async fn questions_before_ready_conflict() {
    let registry = Arc::new(Registry::in_memory());
    let app = router(registry.clone());
    // registered but never built: stays in the indexing state
    let project = registry.add(qassist_service::Manifest {
        id: "p0042".into(),
        name: "pending".into(),
        srs: qassist_core::textseg::Document::from_plain_text("srs", SRS),
        corpus: serde_json::from_value(corpus()).unwrap(),
        config: Default::default(),
    });
    let (status, body) = call(&app, "POST", "/projects/p0042/questions", Some(json!({"question": "What is the wet mass?"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert!(body["error"].as_str().unwrap().contains("indexing"));
    registry.build_project(&project);
    let (status, _) = call(&app, "POST", "/projects/p0042/questions", Some(json!({"question": "What is the wet mass?"}))).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn projects_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let question = json!({"question": "What shall the navigation camera capture?"});
    let (id, before) = {
        let app = router(Arc::new(Registry::open(dir.path()).unwrap()));
        let (_, created) = call(&app, "POST", "/projects", Some(json!({"srs_text": SRS, "corpus": corpus()}))).await;
        let id = created["id"].as_str().unwrap().to_string();
        wait_ready(&app, &id).await;
        let (_, answer) = call(&app, "POST", &format!("/projects/{id}/questions"), Some(question.clone())).await;
        (id, answer)
    };
    assert!(dir.path().join(&id).join("manifest.json").exists());
    assert!(dir.path().join(&id).join("srs_index.json").exists());

    let registry = Arc::new(Registry::open(dir.path()).unwrap());
    let app = router(registry.clone());
    let (status, body) = call(&app, "GET", &format!("/projects/{id}/status"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"]["state"], "ready");
    let (_, after) = call(&app, "POST", &format!("/projects/{id}/questions"), Some(question)).await;
    assert_eq!(before["srs_hits"], after["srs_hits"]);
    assert_eq!(before["corpus_hits"], after["corpus_hits"]);
    // new ids continue after the restored ones
    assert_ne!(registry.next_id(), id);
}

#[tokio::test]
async fn corrupt_index_is_rebuilt_on_open() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = router(Arc::new(Registry::open(dir.path()).unwrap()));
        let (_, created) = call(&app, "POST", "/projects", Some(json!({"srs_text": SRS}))).await;
        let id = created["id"].as_str().unwrap().to_string();
        wait_ready(&app, &id).await;
        id
    };
    std::fs::write(dir.path().join(&id).join("srs_index.json"), b"{}").unwrap();
    let app = router(Arc::new(Registry::open(dir.path()).unwrap()));
    let (_, body) = call(&app, "GET", &format!("/projects/{id}/status"), None).await;
    assert_eq!(body["status"]["state"], "ready");
}
