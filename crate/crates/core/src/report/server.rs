//! HTTP service for the report browser and synonym editor.
//!
//! | Route | Purpose |
//! |---|---|
//! | `GET /api/reports` | index of reports in the reports directory |
//! | `GET /api/reports/:name` | one report as stored |
//! | `GET /api/reports/:name/html` | server-rendered HTML view |
//! | `GET /api/synonyms?q=` | substring search over both synonym kinds |
//! | `POST /api/synonyms` | add a synonym (`{kind, original, synonym}`) |
//! | `POST /api/recheck/:name` | rerun the check with current synonyms |
//! | `GET /` | UI entry page |

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use super::check::{inputs_path, run_check, CheckInputs};
use super::{parse_report, render_html, write_report, DiscrepancyReport};
use crate::fsutil::write_atomic;
use crate::matcher::{AddOutcome, SynonymDb, SynonymEntry, SynonymKind};

/// Shared state: file locations plus the lock that serializes synonym
/// writes and rechecks.
#[derive(Debug)]
pub struct AppState {
    pub reports_dir: PathBuf,
    pub synonyms_path: PathBuf,
    pub static_dir: Option<PathBuf>,
    lock: Mutex<()>,
}

impl AppState {
    pub fn new(reports_dir: impl Into<PathBuf>, synonyms_path: impl Into<PathBuf>) -> Self {
        AppState {
            reports_dir: reports_dir.into(),
            synonyms_path: synonyms_path.into(),
            static_dir: None,
            lock: Mutex::new(()),
        }
    }

    pub fn with_static_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.static_dir = Some(dir.into());
        self
    }

    fn load_synonyms(&self) -> Result<SynonymDb, ApiError> {
        if !self.synonyms_path.exists() {
            return Ok(SynonymDb::default());
        }
        SynonymDb::load(&self.synonyms_path).map_err(|e| ApiError::internal(e.to_string()))
    }
}

/// Index row of `GET /api/reports`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub name: String,
    pub ref_code: String,
    pub filename: String,
    pub creation_date: String,
    pub findings: usize,
}

/// One validation problem in a request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDiagnostic {
    pub field: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} not found"))
    }

    fn internal(message: String) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }

    fn fields(diags: Vec<FieldDiagnostic>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: json!({ "error": "invalid request body", "fields": diags }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/reports", get(list_reports))
        .route("/api/reports/:name", get(get_report))
        .route("/api/reports/:name/html", get(get_report_html))
        .route("/api/synonyms", get(search_synonyms).post(add_synonym))
        .route("/api/recheck/:name", post(recheck))
        .route("/static/*path", get(static_file))
        .with_state(state)
}

/// Bind `addr` and serve until the process stops.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(state))).await
}

/// Report names are file stems inside the reports directory.
fn report_file(dir: &Path, name: &str) -> Result<PathBuf, ApiError> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        return Err(ApiError::not_found("report"));
    }
    let path = dir.join(format!("{name}.json"));
    if path.is_file() {
        Ok(path)
    } else {
        Err(ApiError::not_found("report"))
    }
}

fn is_report_file(path: &Path) -> bool {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.ends_with(".json") && !name.ends_with(".inputs.json") && !name.ends_with(".manifest.json")
}

/// Reports found in `dir`, sorted by name. Unreadable files are skipped.
pub fn scan_reports(dir: &Path) -> Vec<ReportSummary> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut out: Vec<ReportSummary> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| is_report_file(p))
        .filter_map(|p| {
            let report = parse_report(&fs::read_to_string(&p).ok()?).ok()?;
            Some(ReportSummary {
                name: p.file_stem()?.to_string_lossy().into_owned(),
                ref_code: report.ref_code.clone(),
                filename: report.filename.clone(),
                creation_date: report.creation_date.format("%d-%b-%Y").to_string(),
                findings: report.findings(),
            })
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

const INDEX_HTML: &str = "<!DOCTYPE html>\n<html lang=\"en\">\n<head><meta charset=\"utf-8\"><title>Proof checker</title></head>\n<body>\n<h1>Proof checker</h1>\n<p>Reports: <a href=\"/api/reports\">/api/reports</a>. Synonyms: <a href=\"/api/synonyms?q=\">/api/synonyms</a>.</p>\n</body>\n</html>\n";

async fn index(State(state): State<Arc<AppState>>) -> Response {
    if let Some(dir) = &state.static_dir {
        if let Ok(bytes) = tokio::fs::read(dir.join("index.html")).await {
            return Html(bytes).into_response();
        }
    }
    Html(INDEX_HTML).into_response()
}

fn content_type(path: &str) -> &'static str {
    match path.rsplit('.').next() {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(state): State<Arc<AppState>>, UrlPath(path): UrlPath<String>) -> Result<Response, ApiError> {
    let dir = state.static_dir.as_ref().ok_or_else(|| ApiError::not_found("static asset"))?;
    if path.split('/').any(|c| c == ".." || c.is_empty()) {
        return Err(ApiError::not_found("static asset"));
    }
    let bytes = tokio::fs::read(dir.join(&path))
        .await
        .map_err(|_| ApiError::not_found("static asset"))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn list_reports(State(state): State<Arc<AppState>>) -> Json<Vec<ReportSummary>> {
    let dir = state.reports_dir.clone();
    Json(tokio::task::spawn_blocking(move || scan_reports(&dir)).await.unwrap_or_default())
}

async fn read_report(state: &AppState, name: &str) -> Result<(PathBuf, String), ApiError> {
    let path = report_file(&state.reports_dir, name)?;
    let text = tokio::fs::read_to_string(&path)
        .await
        .map_err(|_| ApiError::not_found("report"))?;
    Ok((path, text))
}

async fn get_report(State(state): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> Result<Response, ApiError> {
    let (_, text) = read_report(&state, &name).await?;
    parse_report(&text).map_err(|e| ApiError::internal(format!("stored report is malformed: {e}")))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn get_report_html(
    State(state): State<Arc<AppState>>,
    UrlPath(name): UrlPath<String>,
) -> Result<Html<String>, ApiError> {
    let (_, text) = read_report(&state, &name).await?;
    let report = parse_report(&text).map_err(|e| ApiError::internal(format!("stored report is malformed: {e}")))?;
    Ok(Html(render_html(&report)))
}

#[derive(Debug, Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
}

/// A search hit: the entry's fields plus its kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymHit {
    pub kind: SynonymKind,
    #[serde(flatten)]
    pub entry: SynonymEntry,
}

async fn search_synonyms(
    State(state): State<Arc<AppState>>,
    Query(query): Query<SearchQuery>,
) -> Result<Json<Vec<SynonymHit>>, ApiError> {
    let _guard = state.lock.lock().await;
    let db = state.load_synonyms()?;
    Ok(Json(
        db.search(&query.q)
            .into_iter()
            .map(|(kind, entry)| SynonymHit {
                kind,
                entry: entry.clone(),
            })
            .collect(),
    ))
}

#[derive(Debug)]
struct NewSynonym {
    kind: SynonymKind,
    original: String,
    synonym: String,
}

fn parse_new_synonym(body: &[u8]) -> Result<NewSynonym, ApiError> {
    let value: Value = serde_json::from_slice(body).map_err(|e| {
        ApiError::fields(vec![FieldDiagnostic {
            field: "$".into(),
            message: format!("body is not JSON: {e}"),
        }])
    })?;
    let Some(obj) = value.as_object() else {
        return Err(ApiError::fields(vec![FieldDiagnostic {
            field: "$".into(),
            message: "body must be a JSON object".into(),
        }]));
    };
    let mut diags = Vec::new();
    let mut text = |field: &str| -> Option<String> {
        match obj.get(field) {
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
            Some(Value::String(_)) => {
                diags.push(FieldDiagnostic {
                    field: field.into(),
                    message: "must not be empty".into(),
                });
                None
            }
            Some(_) => {
                diags.push(FieldDiagnostic {
                    field: field.into(),
                    message: "must be a string".into(),
                });
                None
            }
            None => {
                diags.push(FieldDiagnostic {
                    field: field.into(),
                    message: "is required".into(),
                });
                None
            }
        }
    };
    let kind_text = text("kind");
    let original = text("original");
    let synonym = text("synonym");
    let kind = kind_text.and_then(|k| match k.as_str() {
        "institute" => Some(SynonymKind::Institute),
        "author" => Some(SynonymKind::Author),
        other => {
            diags.push(FieldDiagnostic {
                field: "kind".into(),
                message: format!("must be \"institute\" or \"author\", got {other:?}"),
            });
            None
        }
    });
    for key in obj.keys() {
        if !["kind", "original", "synonym"].contains(&key.as_str()) {
            diags.push(FieldDiagnostic {
                field: key.clone(),
                message: "unknown field".into(),
            });
        }
    }
    match (kind, original, synonym) {
        (Some(kind), Some(original), Some(synonym)) if diags.is_empty() => Ok(NewSynonym {
            kind,
            original,
            synonym,
        }),
        _ => Err(ApiError::fields(diags)),
    }
}

async fn add_synonym(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req = parse_new_synonym(&body)?;
    let _guard = state.lock.lock().await;
    let mut db = state.load_synonyms()?;
    let outcome = db
        .add_synonym(req.kind, &req.original, &req.synonym)
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, format!("{:?} is already a known spelling", req.synonym)))?;
    let (label, index) = match outcome {
        AddOutcome::Appended { index } => ("appended", index),
        AddOutcome::Created { index } => ("created", index),
    };
    let entry = db.list(req.kind)[index].clone();
    let path = state.synonyms_path.clone();
    let json_text = db.to_json();
    tokio::task::spawn_blocking(move || write_atomic(&path, json_text.as_bytes()))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(format!("writing synonyms: {e}")))?;
    Ok((
        StatusCode::CREATED,
        Json(json!({ "outcome": label, "kind": req.kind, "entry": entry })),
    )
        .into_response())
}

async fn recheck(State(state): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> Result<Response, ApiError> {
    let path = report_file(&state.reports_dir, &name)?;
    let inputs_file = inputs_path(&path);
    if !inputs_file.is_file() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("report {name:?} has no inputs record and cannot be rerun"),
        ));
    }
    let _guard = state.lock.lock().await;
    let db = state.load_synonyms()?;
    let base = state.reports_dir.clone();
    let report: DiscrepancyReport = tokio::task::spawn_blocking(move || {
        let inputs = CheckInputs::load(&inputs_file)?.resolved(&base);
        run_check(&inputs, &db)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let text = write_report(&report);
    let out = path.clone();
    let body = text.clone();
    tokio::task::spawn_blocking(move || write_atomic(&out, body.as_bytes()))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(format!("writing report: {e}")))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_diagnostics_name_fields() {
        let e = parse_new_synonym(br#"{"kind":"planet","original":"","extra":1}"#).unwrap_err();
        let fields: Vec<String> = e.body["fields"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| d["field"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(fields, ["original", "synonym", "kind", "extra"]);
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
    }

    #[test]
    fn report_names_cannot_escape() {
        let dir = tempfile::tempdir().unwrap();
        assert!(report_file(dir.path(), "../x").is_err());
        assert!(report_file(dir.path(), "missing").is_err());
    }
}
