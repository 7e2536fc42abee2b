mod common;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pubforge::matcher::SynonymDb;
use pubforge::report::check::{inputs_path, run_check};
use pubforge::report::server::{router, AppState};
use pubforge::report::{parse_report, write_report};
use serde_json::{json, Value};
use tower::ServiceExt;

use common::*;

const ALBERTA: &str = "Department of Physics, University of Alberta, Edmonton AB, Canada";
const ABBREV_REPORT: &str = "ANA-SYN-2020-02_proof_abbrev";

/// Reports directory holding the abbreviated-Alberta report with its inputs
/// record, plus a writable copy of the fixture synonyms.
fn setup(dir: &Path) -> Router {
    let synonyms = dir.join("synonyms.json");
    fs::copy(fixture("synonyms.json"), &synonyms).unwrap();
    let reports = dir.join("reports");
    fs::create_dir_all(&reports).unwrap();
    let inputs = fixture_inputs("synonyms/authorlist.xml", "synonyms/proof_abbrev.txt");
    let report = run_check(&inputs, &SynonymDb::load(&synonyms).unwrap()).unwrap();
    let path = report.path_in(&reports);
    fs::write(&path, write_report(&report)).unwrap();
    fs::write(inputs_path(&path), inputs.to_json()).unwrap();
    // a report without an inputs record
    fs::write(reports.join("ANA-TEST-2020-01_proof.json"), write_report(&seeded_report())).unwrap();
    router(Arc::new(AppState::new(reports, synonyms)))
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String, String) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, ctype, String::from_utf8(bytes.to_vec()).unwrap())
}

fn parse(body: &str) -> Value {
    serde_json::from_str(body).unwrap()
}

#[tokio::test]
async fn lists_and_serves_reports() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());

    let (status, _, body) = send(&app, Method::GET, "/api/reports", None).await;
    assert_eq!(status, StatusCode::OK);
    let list = parse(&body);
    let names: Vec<&str> = list.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, [ABBREV_REPORT, "ANA-TEST-2020-01_proof"]);
    assert_eq!(list[1]["findings"], 4);
    assert_eq!(list[1]["creation_date"], "01-Feb-2020");

    let (status, ctype, body) = send(&app, Method::GET, "/api/reports/ANA-TEST-2020-01_proof", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.starts_with("application/json"));
    assert_eq!(body, fs::read_to_string(golden("seeded_report.json")).unwrap());

    let (status, ctype, body) = send(&app, Method::GET, "/api/reports/ANA-TEST-2020-01_proof/html", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.starts_with("text/html"));
    assert!(body.contains("B. Abbott"));

    for missing in ["/api/reports/nope", "/api/reports/..%2Fsynonyms", "/api/reports/nope/html"] {
        let (status, _, body) = send(&app, Method::GET, missing, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{missing}");
        assert!(parse(&body)["error"].is_string());
    }

    let (status, ctype, _) = send(&app, Method::GET, "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.starts_with("text/html"));
}

#[tokio::test]
async fn synonym_search() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());
    let (status, _, body) = send(&app, Method::GET, "/api/synonyms?q=Alberta", None).await;
    assert_eq!(status, StatusCode::OK);
    let hits = parse(&body);
    assert_eq!(hits.as_array().unwrap().len(), 1);
    assert_eq!(hits[0]["kind"], "institute");
    assert_eq!(hits[0]["id"], "2");
    assert_eq!(
        hits[0]["synonyms"],
        json!(["Department of Physics, University of Alberta, Edmonton, Alberta, Canada"])
    );

    let (_, _, body) = send(&app, Method::GET, "/api/synonyms?q=b%C3%B2b", None).await;
    let hits = parse(&body);
    assert_eq!(hits[0]["kind"], "author");
    assert_eq!(hits[0]["foafName"], "A Bub");
}

#[tokio::test]
async fn synonym_post_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());
    let before = fs::read_to_string(dir.path().join("synonyms.json")).unwrap();

    let (status, _, body) = send(&app, Method::POST, "/api/synonyms", Some(json!({"kind": "planet", "original": ""}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let fields: Vec<String> = parse(&body)["fields"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["field"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(fields, ["original", "synonym", "kind"]);

    let dup = json!({"kind": "institute", "original": ALBERTA, "synonym": "Department of Physics, University of Alberta, Edmonton, Alberta, Canada"});
    let (status, _, _) = send(&app, Method::POST, "/api/synonyms", Some(dup)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(fs::read_to_string(dir.path().join("synonyms.json")).unwrap(), before);

    let new = json!({"kind": "author", "original": "G. Aad", "synonym": "G. Aád"});
    let (status, _, body) = send(&app, Method::POST, "/api/synonyms", Some(new)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(parse(&body)["outcome"], "created");
    let db = SynonymDb::load(&dir.path().join("synonyms.json")).unwrap();
    assert_eq!(db.authors.len(), 2);
}

#[tokio::test]
async fn recheck_applies_new_synonym() {
    let dir = tempfile::tempdir().unwrap();
    let app = setup(dir.path());
    let uri = format!("/api/reports/{ABBREV_REPORT}");
    let (_, _, body) = send(&app, Method::GET, &uri, None).await;
    let before = parse_report(&body).unwrap();
    assert_eq!(before.institutes_missing_pdf_list.len(), 1);
    assert_eq!(before.institutes_missing_pdf_list[0].reference, ALBERTA);
    assert!(before.institutes_missing_pdf_skip.is_empty());

    let add = json!({"kind": "institute", "original": ALBERTA, "synonym": "Univ. of Alberta, Canada"});
    let (status, _, body) = send(&app, Method::POST, "/api/synonyms", Some(add)).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(parse(&body)["outcome"], "appended");

    let (status, _, body) = send(&app, Method::POST, &format!("/api/recheck/{ABBREV_REPORT}"), None).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let after = parse_report(&body).unwrap();
    assert!(after.institutes_missing_pdf_list.is_empty());
    let skipped: Vec<&str> = after.institutes_missing_pdf_skip.iter().map(|e| e.reference.as_str()).collect();
    assert_eq!(skipped, [ALBERTA]);
    assert_eq!(after.creation_date, before.creation_date);

    let (_, _, stored) = send(&app, Method::GET, &uri, None).await;
    assert_eq!(parse_report(&stored).unwrap(), after);

    let (status, _, _) = send(&app, Method::POST, "/api/recheck/ANA-TEST-2020-01_proof", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _, _) = send(&app, Method::POST, "/api/recheck/unknown", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_files_are_confined() {
    let dir = tempfile::tempdir().unwrap();
    let web = dir.path().join("web");
    fs::create_dir_all(web.join("assets")).unwrap();
    fs::write(web.join("index.html"), "<html>ui</html>").unwrap();
    fs::write(web.join("assets/app.js"), "console.log(1)").unwrap();
    let app = router(Arc::new(AppState::new(dir.path(), dir.path().join("s.json")).with_static_dir(&web)));

    let (status, _, body) = send(&app, Method::GET, "/", None).await;
    assert_eq!((status, body.as_str()), (StatusCode::OK, "<html>ui</html>"));
    let (status, ctype, _) = send(&app, Method::GET, "/static/assets/app.js", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype, "text/javascript");
    let (status, _, _) = send(&app, Method::GET, "/static/../s.json", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
