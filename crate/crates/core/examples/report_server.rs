//! Serve discrepancy reports and the synonym API.
//!
//! By default the example answers a few requests in-process and exits. Pass an
//! address (`cargo run --example report_server -- 127.0.0.1:8080`) to keep it
//! listening instead.

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request};
use http_body_util::BodyExt;
use pubforge::matcher::SynonymDb;
use pubforge::report::check::{inputs_path, run_check, CheckInputs, ProofFormat};
use pubforge::report::server::{router, AppState};
use pubforge::report::write_report;
use tower::ServiceExt;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let dir = tempfile::tempdir()?;
    let synonyms = dir.path().join("synonyms.json");
    std::fs::copy(fixtures.join("synonyms.json"), &synonyms)?;
    let reports = dir.path().join("reports");
    std::fs::create_dir_all(&reports)?;

    let inputs = CheckInputs {
        author_list: fixtures.join("synonyms/authorlist.xml"),
        proof: fixtures.join("synonyms/proof_abbrev.txt"),
        proof_format: ProofFormat::Text,
        publisher: "aps".into(),
        agencies: Some(fixtures.join("agencies.json")),
        thresholds: Default::default(),
        document: String::new(),
        creation_date: None,
    };
    let report = run_check(&inputs, &SynonymDb::load(&synonyms)?)?;
    let path = report.path_in(&reports);
    std::fs::write(&path, write_report(&report))?;
    std::fs::write(inputs_path(&path), inputs.to_json())?;

    let app = router(Arc::new(AppState::new(&reports, &synonyms)));

    if let Some(addr) = std::env::args().nth(1) {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        return Ok(());
    }

    let name = report.name();
    let requests = [
        (Method::GET, "/api/reports".to_string(), None),
        (
            Method::POST,
            "/api/synonyms".to_string(),
            Some(r#"{"kind": "institute", "original": "Department of Physics, University of Alberta, Edmonton AB, Canada", "synonym": "Univ. of Alberta, Canada"}"#),
        ),
        (Method::POST, format!("/api/recheck/{name}"), None),
    ];
    for (method, uri, body) in requests {
        let mut req = Request::builder().method(method.clone()).uri(&uri);
        if body.is_some() {
            req = req.header(header::CONTENT_TYPE, "application/json");
        }
        let req = req.body(body.map(Body::from).unwrap_or_else(Body::empty))?;
        let resp = app.clone().oneshot(req).await?;
        let status = resp.status();
        let bytes = resp.into_body().collect().await?.to_bytes();
        println!("{method} {uri} -> {status}\n{}\n", String::from_utf8_lossy(&bytes));
    }
    Ok(())
}
