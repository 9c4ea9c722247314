use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use seqclear_core::gadgets::{build, Params};
use seqclear_core::{Policy, Rational, Scalar, State};
use seqclear_service::{router, ServiceConfig, Store};

fn app() -> Router {
    router(
        Arc::new(Store::new(Duration::from_secs(60))),
        &ServiceConfig::default(),
    )
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn create(app: &Router, body: Value) -> (String, Value) {
    let (status, v) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    (
        v["session_id"].as_str().unwrap().to_string(),
        v["state"].clone(),
    )
}

fn rate(state: &Value, bank: &str) -> String {
    state["banks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["id"] == bank)
        .unwrap()["rate"]["exact"]
        .as_str()
        .unwrap()
        .to_string()
}

fn code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn branching_session_walkthrough() {
    let app = app();
    let (id, state) = create(&app, json!({"gadget": "branching", "model": "reversible"})).await;
    assert_eq!(state["outcome"]["status"], "running");

    let (status, up) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/updatable"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let banks: Vec<(&str, &str)> = up["banks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| {
            (
                b["bank"].as_str().unwrap(),
                b["target"]["exact"].as_str().unwrap(),
            )
        })
        .collect();
    assert_eq!(banks, vec![("u", "0"), ("v", "0")]);

    let (status, state) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/step"),
        Some(json!({"bank": "u"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        (rate(&state, "u").as_str(), rate(&state, "v").as_str()),
        ("0", "1")
    );
    assert_eq!(state["outcome"]["status"], "stabilized");
    assert_eq!(state["trace"][0]["bank"], "u");
    let (_, up) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/updatable"),
        None,
    )
    .await;
    assert!(up["banks"].as_array().unwrap().is_empty());

    let (status, err) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/step"),
        Some(json!({"bank": "u"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&err), "not_updatable");

    let (status, eq) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/equilibrium"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(eq["holds"], true);

    let (status, state) = call(&app, Method::POST, &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rate(&state, "u"), "1");
    let (status, err) = call(&app, Method::POST, &format!("/sessions/{id}/undo"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&err), "nothing_to_undo");
}

#[tokio::test]
async fn branches_are_independent_copies() {
    let app = app();
    let (root, _) = create(
        &app,
        json!({"gadget": "earlydef_monotone", "model": "monotone"}),
    )
    .await;
    let (status, other) = call(
        &app,
        Method::POST,
        &format!("/sessions/{root}/branch"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let other = other["session_id"].as_str().unwrap().to_string();
    assert_ne!(other, root);

    for (id, first) in [(&root, "v1"), (&other, "v2")] {
        let (status, _) = call(
            &app,
            Method::POST,
            &format!("/sessions/{id}/step"),
            Some(json!({"bank": first})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
    }
    // Finish both runs lexicographically.
    for id in [&root, &other] {
        loop {
            let (_, up) = call(
                &app,
                Method::GET,
                &format!("/sessions/{id}/updatable"),
                None,
            )
            .await;
            let Some(next) = up["banks"].as_array().unwrap().first().cloned() else {
                break;
            };
            call(
                &app,
                Method::POST,
                &format!("/sessions/{id}/step"),
                Some(json!({"bank": next["bank"]})),
            )
            .await;
        }
    }
    let (_, a) = call(&app, Method::GET, &format!("/sessions/{root}"), None).await;
    let (_, b) = call(&app, Method::GET, &format!("/sessions/{other}"), None).await;
    assert_eq!(rate(&a, "v1"), "3/4");
    assert_eq!(rate(&b, "v1"), "1/2");
    assert_eq!(b["parent"], root.as_str());
    assert!(a["parent"].is_null());
}

#[tokio::test]
async fn api_steps_match_the_library() {
    let app = app();
    let (id, _) = create(&app, json!({"gadget": "earlydef_reversible"})).await;
    let bp = build::<Rational>("earlydef_reversible", &Params::new()).unwrap();
    let mut lib = State::initial(bp.system.clone(), Policy::REVERSIBLE);
    let mut last = Value::Null;
    for bank in ["v2", "u1", "w1", "v2", "v1"] {
        lib.step(bank).unwrap();
        let (status, state) = call(
            &app,
            Method::POST,
            &format!("/sessions/{id}/step"),
            Some(json!({"bank": bank})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        last = state;
    }
    for (v, r) in lib.rates().iter().enumerate() {
        assert_eq!(rate(&last, bp.system.id(v)), r.render());
    }
    assert_eq!(last["outcome"]["time"], 5);
    assert_eq!(last["outcome"]["status"], "stabilized");
    assert_eq!(last["outcome"]["defaulting_steps"], lib.defaulting_steps());
}

#[tokio::test]
async fn frozen_contracts_are_reported() {
    let app = app();
    let (id, _) = create(
        &app,
        json!({"gadget": "earlydef_monotone", "model": "monotone"}),
    )
    .await;
    let (_, state) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/step"),
        Some(json!({"bank": "v2"})),
    )
    .await;
    let cds = state["contracts"]["cds"].as_array().unwrap();
    let frozen: Vec<&Value> = cds.iter().filter(|c| !c["frozen"].is_null()).collect();
    assert!(!frozen.is_empty());
    for c in frozen {
        assert_eq!(c["frozen_at"], 1);
        assert_eq!(c["current"], c["frozen"]);
    }
}

#[tokio::test]
async fn uploaded_networks_are_accepted() {
    let app = app();
    let network = json!({
        "banks": [{"id": "a", "external_assets": "1"}, {"id": "b", "external_assets": "0"}],
        "debts": [{"debtor": "a", "creditor": "b", "weight": "3/2"}]
    });
    let (id, state) = create(&app, json!({"network": network, "model": "smart"})).await;
    assert_eq!(state["model"], "smart");
    let (_, up) = call(
        &app,
        Method::GET,
        &format!("/sessions/{id}/updatable"),
        None,
    )
    .await;
    assert_eq!(up["banks"][0]["bank"], "a");
    assert_eq!(up["banks"][0]["target"]["exact"], "2/3");
}

#[tokio::test]
async fn errors_have_distinct_codes() {
    let app = app();
    let (status, err) = call(&app, Method::GET, "/sessions/nope", None).await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::NOT_FOUND, "unknown_session")
    );

    let (status, err) = call(&app, Method::POST, "/sessions", Some(json!({"gadget": 3}))).await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::BAD_REQUEST, "malformed_body")
    );
    let (status, err) = call(&app, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::BAD_REQUEST, "malformed_body")
    );

    let (status, err) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"gadget": "nope"})),
    )
    .await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::UNPROCESSABLE_ENTITY, "unknown_gadget")
    );
    let (status, err) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"gadget": "branching", "model": "lazy"})),
    )
    .await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::UNPROCESSABLE_ENTITY, "unknown_model")
    );
    let (status, err) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"gadget": "longstab"})),
    )
    .await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::UNPROCESSABLE_ENTITY, "invalid_params")
    );
    let bad = json!({"banks": [{"id": "a", "external_assets": "0.5"}]});
    let (status, err) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"network": bad})),
    )
    .await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::UNPROCESSABLE_ENTITY, "parse_error")
    );

    let (id, _) = create(&app, json!({"gadget": "branching"})).await;
    let (status, err) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/step"),
        Some(json!({"bank": "zz"})),
    )
    .await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::NOT_FOUND, "unknown_bank")
    );
    let (status, err) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/step"),
        Some(json!({"banq": "u"})),
    )
    .await;
    assert_eq!(
        (status, code(&err)),
        (StatusCode::BAD_REQUEST, "malformed_body")
    );
}

#[tokio::test]
async fn concurrent_steps_on_one_session_serialize() {
    let app = app();
    let (id, _) = create(&app, json!({"gadget": "branching"})).await;
    let tasks: Vec<_> = (0..8)
        .map(|i| {
            let app = app.clone();
            let uri = format!("/sessions/{id}/step");
            let bank = if i % 2 == 0 { "u" } else { "v" };
            tokio::spawn(async move {
                call(&app, Method::POST, &uri, Some(json!({"bank": bank})))
                    .await
                    .0
            })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        if t.await.unwrap() == StatusCode::OK {
            ok += 1;
        }
    }
    // Exactly one step can happen before the gadget stabilizes.
    assert_eq!(ok, 1);
    let (_, state) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(state["outcome"]["time"], 1);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let store = Arc::new(Store::new(Duration::ZERO));
    let app = router(Arc::clone(&store), &ServiceConfig::default());
    create(&app, json!({"gadget": "branching"})).await;
    assert_eq!(store.len(), 1);
    std::thread::sleep(Duration::from_millis(5));
    assert_eq!(store.sweep(), 1);
    assert!(store.is_empty());
}

#[tokio::test]
async fn root_serves_a_page() {
    let app = app();
    let resp = app
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);

    let dir = std::env::temp_dir().join(format!("seqclear-static-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("index.html"), "<p>ui</p>").unwrap();
    let config = ServiceConfig {
        static_dir: Some(dir.clone()),
        ..ServiceConfig::default()
    };
    let app = router(Arc::new(Store::new(Duration::from_secs(60))), &config);
    let resp = app
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<p>ui</p>");
    std::fs::remove_dir_all(dir).unwrap();
}
