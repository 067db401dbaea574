use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use dp_planner_service::{router, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Harness {
    _dir: tempfile::TempDir,
    app: Router,
}

impl Harness {
    fn new() -> Harness {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path()).unwrap());
        Harness {
            app: router(store),
            _dir: dir,
        }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    async fn dataset(&self) -> String {
        let mut csv = String::from("id,eth,dx\n");
        for i in 0..400 {
            let eth = ["a", "b", "c"][i % 3];
            let dx = if i % 4 == 0 { "htn" } else { "none" };
            csv.push_str(&format!("{i},{eth},{dx}\n"));
        }
        let (status, body) = self
            .call(
                Method::POST,
                "/datasets",
                Some(json!({
                    "csv": csv,
                    "source": "test cohort",
                    "schema": {
                        "id": {"type": "integer", "is_identifier": true},
                        "eth": {"type": "categorical"},
                        "dx": {"type": "categorical", "is_phi": true}
                    }
                })),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        assert_eq!(body["n"], 400);
        body["id"].as_str().unwrap().to_owned()
    }

    async fn session(&self) -> String {
        let dataset_id = self.dataset().await;
        let (status, body) = self
            .call(
                Method::POST,
                "/sessions",
                Some(json!({
                    "dataset_id": dataset_id,
                    "total_budget": 2.0,
                    "seed": 5,
                    "replicates": 30,
                    "queries": [
                        {"name": "htn", "group_by": "eth", "where": {"attribute": "dx", "comparator": "=", "literal": "htn"}, "extrapolation": true},
                        {"name": "total"},
                        {"name": "distinct", "distinct": true},
                        {"name": "ids", "where": {"attribute": "id", "comparator": "<", "literal": 100}}
                    ]
                })),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["id"].as_str().unwrap().to_owned()
    }
}

#[tokio::test]
async fn create_and_view() {
    let h = Harness::new();
    let id = h.session().await;
    let (status, view) = h.call(Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["schema_version"], 1);
    assert_eq!(view["allocation"]["mode"], "manual");
    assert!((view["remaining_budget"].as_f64().unwrap() - 1.996).abs() < 1e-12);
    assert_eq!(view["queries"][0]["result"]["subgroups"].as_array().unwrap().len(), 3);
    assert_eq!(view["queries"][0]["metadata"]["sensitive_variables"], json!(["dx"]));
}

#[tokio::test]
async fn unknown_session_is_404() {
    let h = Harness::new();
    let (status, body) = h.call(Method::GET, "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "session_not_found");
    let (status, _) = h.call(Method::GET, "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_spec_reports_field_path() {
    let h = Harness::new();
    let dataset_id = h.dataset().await;
    let (status, body) = h
        .call(
            Method::POST,
            "/sessions",
            Some(json!({
                "dataset_id": dataset_id,
                "total_budget": 1.0,
                "queries": [{"name": "ok"}, {"name": "bad", "group_by": "zip"}]
            })),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "validation_error");
    assert_eq!(body["field_path"], "queries[1].group_by");

    let (status, body) = h
        .call(
            Method::POST,
            "/sessions",
            Some(json!({"dataset_id": dataset_id, "total_budget": 1.0, "queries": [{"name": "a"}, {"name": "a"}]})),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["field_path"], "queries[1].name");

    let (status, body) = h
        .call(Method::POST, "/sessions", Some(json!({"dataset_id": "feed", "total_budget": 1.0, "queries": [{"name": "a"}]})))
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["field_path"], "dataset_id");

    let (status, body) = h.call(Method::POST, "/sessions", Some(json!({"queries": 3}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "bad_request");
}

#[tokio::test]
async fn bad_cell_names_row_and_column() {
    let h = Harness::new();
    let (status, body) = h
        .call(
            Method::POST,
            "/datasets",
            Some(json!({"csv": "flag\ntrue\nmaybe\n", "schema": {"flag": {"type": "boolean"}}})),
        )
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["code"], "ingest_error");
    let msg = body["message"].as_str().unwrap();
    assert!(msg.contains('2') && msg.contains("flag") && msg.contains("maybe"), "{msg}");
}

#[tokio::test]
async fn whatif_payloads() {
    let h = Harness::new();
    let id = h.session().await;
    let uri = format!("/sessions/{id}/whatif");
    let req = json!({"query": "htn", "epsilon": 0.5, "frames": 4});
    let (status, a) = h.call(Method::POST, &uri, Some(req.clone())).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    let (_, b) = h.call(Method::POST, &uri, Some(req)).await;
    assert_eq!(a, b);
    assert_eq!(a["schema_version"], 1);
    let sg = &a["subgroups"][0];
    assert_eq!(sg["dotplot"]["dots"].as_array().unwrap().len(), 25);
    assert_eq!(sg["hops"]["frames"].as_array().unwrap().len(), 4);
    assert_eq!(sg["hops"]["frame_rate"], 2.5);
    assert_eq!(sg["nonprivate_cis"].as_array().unwrap().len(), 3);
    assert_eq!(sg["private_ci_preview"].as_array().unwrap().len(), 3);
    assert_eq!(a["risk_curve"]["points"].as_array().unwrap().len(), 500);

    let (_, plain) = h.call(Method::POST, &uri, Some(json!({"query": "total", "epsilon": 0.5}))).await;
    let text = plain.to_string();
    assert!(!text.contains("nonprivate_cis") && !text.contains("private_ci"));

    let (status, body) = h.call(Method::POST, &uri, Some(json!({"query": "nope", "epsilon": 0.5}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown_query");
}

#[tokio::test]
async fn budget_and_release_lifecycle() {
    let h = Harness::new();
    let id = h.session().await;
    let budget = format!("/sessions/{id}/budget");
    let release = format!("/sessions/{id}/release");

    let (status, body) = h.call(Method::GET, &release, None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "not_finalized");

    let (status, body) = h.call(Method::PATCH, &budget, Some(json!({"op": "toggle_lock", "query": "htn"}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    h.call(Method::PATCH, &budget, Some(json!({"op": "set_mode", "mode": "responsive"}))).await;
    h.call(Method::PATCH, &budget, Some(json!({"op": "toggle_lock", "query": "ids"}))).await;
    let (status, body) = h
        .call(Method::PATCH, &budget, Some(json!({"op": "set_epsilon", "query": "htn", "value": 1.0})))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let eps: Vec<f64> = body["allocation"]["queries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|q| q["epsilon"].as_f64().unwrap())
        .collect();
    assert_eq!(eps[0], 1.0);
    assert_eq!(eps[3], 0.001);
    assert!((eps[1] - 0.4995).abs() < 1e-12 && (eps[2] - 0.4995).abs() < 1e-12);

    let (status, body) = h
        .call(Method::PATCH, &budget, Some(json!({"op": "set_epsilon", "query": "total", "value": 5.0})))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["notice"]["applied"], 2.0);

    let (status, risk) = h.call(Method::GET, &format!("/sessions/{id}/risk-curve"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(risk["queries"].as_array().unwrap().len(), 4);

    let (status, first) = h.call(Method::POST, &release, None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(first["idempotent_replay"], false);
    let (status, second) = h.call(Method::POST, &release, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(second["idempotent_replay"], true);
    assert_eq!(first["document"], second["document"]);

    let (status, doc) = h.call(Method::GET, &release, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc, first["document"]);
    assert_eq!(doc["schema_version"], 1);
    let spent: f64 = doc["queries"].as_array().unwrap().iter().map(|q| q["epsilon_spent"].as_f64().unwrap()).sum();
    assert!((doc["overall_risk"]["epsilon"].as_f64().unwrap() - spent).abs() < 1e-12);

    let (status, body) = h.call(Method::PATCH, &budget, Some(json!({"op": "set_total", "value": 3.0}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["code"], "finalized");
    let (status, _) = h
        .call(Method::POST, &format!("/sessions/{id}/whatif"), Some(json!({"query": "htn", "epsilon": 0.5})))
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_finalize_spends_once() {
    let h = Harness::new();
    let id = h.session().await;
    let uri = format!("/sessions/{id}/release");
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = h.app.clone();
            let uri = uri.clone();
            tokio::spawn(async move {
                let req = Request::builder().method(Method::POST).uri(uri).body(Body::empty()).unwrap();
                let resp = app.oneshot(req).await.unwrap();
                let status = resp.status();
                let bytes = resp.into_body().collect().await.unwrap().to_bytes();
                (status, serde_json::from_slice::<Value>(&bytes).unwrap())
            })
        })
        .collect();
    let mut results = Vec::new();
    for t in tasks {
        results.push(t.await.unwrap());
    }
    assert_eq!(results.iter().filter(|(s, _)| *s == StatusCode::CREATED).count(), 1);
    for (_, body) in &results {
        assert_eq!(body["document"], results[0].1["document"]);
    }
}
