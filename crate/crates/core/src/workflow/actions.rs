//! Side-effect actions run when a step proceeds. Each run yields an
//! [`Effect`] record; the shipped actions write into a local workspace.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::authorlist::{render_author_list, snapshot_author_list, Format, MemberDb, HEADER_REF_CODE, HEADER_TITLE};
use crate::fsutil::write_atomic;

#[derive(Debug, Error)]
#[error("action {kind}: {message}")]
pub struct ActionError {
    pub kind: String,
    pub message: String,
}

/// Record of one executed action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Effect {
    pub action: String,
    pub node: String,
    pub target: String,
    #[serde(default)]
    pub details: Value,
}

/// Where actions may write.
#[derive(Debug, Clone, Copy)]
pub struct ActionEnv<'a> {
    pub workspace: &'a Path,
    pub node: &'a str,
}

pub trait Action: Send + Sync {
    /// Run with already-rendered parameters.
    fn run(&self, params: &Map<String, Value>, env: ActionEnv<'_>) -> Result<Effect, String>;
}

#[derive(Clone)]
pub struct ActionRegistry {
    actions: BTreeMap<String, Arc<dyn Action>>,
}

impl fmt::Debug for ActionRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.actions.keys()).finish()
    }
}

impl Default for ActionRegistry {
    fn default() -> Self {
        let mut r = ActionRegistry::empty();
        r.register("create_group", CreateGroup)
            .register("create_repository", CreateRepository)
            .register("push_authorlist", PushAuthorList);
        r
    }
}

impl ActionRegistry {
    pub fn empty() -> Self {
        ActionRegistry { actions: BTreeMap::new() }
    }

    pub fn register(&mut self, kind: &str, action: impl Action + 'static) -> &mut Self {
        self.actions.insert(kind.to_string(), Arc::new(action));
        self
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.actions.contains_key(kind)
    }

    pub fn run(&self, kind: &str, params: &Map<String, Value>, env: ActionEnv<'_>) -> Result<Effect, ActionError> {
        let action = self.actions.get(kind).ok_or_else(|| ActionError {
            kind: kind.to_string(),
            message: "not registered".to_string(),
        })?;
        action.run(params, env).map_err(|message| ActionError {
            kind: kind.to_string(),
            message,
        })
    }
}

fn str_param<'a>(params: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    params
        .get(key)
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| format!("missing string parameter {key:?}"))
}

/// A path component that cannot escape the workspace.
fn safe_name(name: &str) -> Result<&str, String> {
    if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
        Err(format!("{name:?} is not a valid name"))
    } else {
        Ok(name)
    }
}

/// Records the group and its members; no external service is contacted.
struct CreateGroup;

impl Action for CreateGroup {
    fn run(&self, params: &Map<String, Value>, env: ActionEnv<'_>) -> Result<Effect, String> {
        let name = str_param(params, "name")?;
        let members: Vec<String> = match params.get("members") {
            None => Vec::new(),
            Some(Value::Array(items)) => items.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(other) => return Err(format!("members must be a list, got {other}")),
        };
        Ok(Effect {
            action: "create_group".into(),
            node: env.node.into(),
            target: name.into(),
            details: json!({ "members": members }),
        })
    }
}

/// Instantiates the document template under `repos/<name>`.
struct CreateRepository;

impl Action for CreateRepository {
    fn run(&self, params: &Map<String, Value>, env: ActionEnv<'_>) -> Result<Effect, String> {
        let name = safe_name(str_param(params, "name")?)?;
        let dir = env.workspace.join("repos").join(name);
        let existed = dir.exists();
        let project = crate::template::write_instance(&dir, name).map_err(|e| e.to_string())?;
        let files: Vec<&String> = project.files.keys().chain(project.assets.keys()).collect();
        Ok(Effect {
            action: "create_repository".into(),
            node: env.node.into(),
            target: name.into(),
            details: json!({
                "path": dir.display().to_string(),
                "existed": existed,
                "files": files,
            }),
        })
    }
}

/// Snapshots the member database into the repository's author list files;
/// the first push adds them, later pushes update them.
struct PushAuthorList;

pub const AUTHORLIST_XML: &str = "authorlist/authorlist.xml";
pub const AUTHORLIST_TEX: &str = "authorlist/authorlist.tex";

impl Action for PushAuthorList {
    fn run(&self, params: &Map<String, Value>, env: ActionEnv<'_>) -> Result<Effect, String> {
        let repo = safe_name(str_param(params, "repository")?)?;
        let repo_dir = env.workspace.join("repos").join(repo);
        let db_rel = params.get("member_db").and_then(Value::as_str).unwrap_or("member_db.json");
        let db_path = env.workspace.join(db_rel);
        let effect = |details| Effect {
            action: "push_authorlist".into(),
            node: env.node.into(),
            target: repo.into(),
            details,
        };
        if !db_path.exists() {
            return Ok(effect(json!({
                "mode": "stub",
                "reason": format!("no member database at {}", db_path.display()),
            })));
        }
        let ref_date: NaiveDate = str_param(params, "ref_date")?
            .parse()
            .map_err(|_| "ref_date must be an ISO date".to_string())?;
        let db = MemberDb::load(&db_path).map_err(|e| e.to_string())?;
        let mut header = BTreeMap::new();
        header.insert(HEADER_REF_CODE.to_string(), repo.to_string());
        if let Ok(title) = str_param(params, "title") {
            header.insert(HEADER_TITLE.to_string(), title.to_string());
        }
        let list = snapshot_author_list(&db, ref_date, &header).map_err(|e| e.to_string())?;
        let xml_path = repo_dir.join(AUTHORLIST_XML);
        let mode = if xml_path.exists() { "update" } else { "add" };
        for (rel, format) in [(AUTHORLIST_XML, Format::Xml), (AUTHORLIST_TEX, Format::Tex)] {
            let text = render_author_list(&list, format).map_err(|e| e.to_string())?;
            let path = repo_dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| e.to_string())?;
            }
            write_atomic(&path, text.as_bytes()).map_err(|e| e.to_string())?;
        }
        Ok(effect(json!({
            "mode": mode,
            "authors": list.authors.len(),
            "institutes": list.institutes.len(),
            "files": [AUTHORLIST_XML, AUTHORLIST_TEX],
        })))
    }
}
