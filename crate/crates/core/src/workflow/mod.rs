//! JSON-configured workflow engine: a directed (possibly cyclic) graph of
//! steps with role-gated Save/Proceed transitions, guard expressions,
//! side-effect actions and outbox notifications.

mod actions;
mod guard;
mod notify;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::refcode::RefCode;

pub use actions::{Action, ActionEnv, ActionError, ActionRegistry, Effect, AUTHORLIST_TEX, AUTHORLIST_XML};
pub use guard::{Guard, GuardError};
pub use notify::{
    read_outbox, render_notification, render_string, render_value, write_outbox, Message, NotificationTemplate,
    RenderError,
};

/// A field that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

fn list_issues(issues: &[FieldIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("{path}: duplicate id {id:?}")]
    DuplicateId { path: String, id: String },
    #[error("{path}: unknown node {node:?}")]
    DanglingEdge { path: String, node: String },
    #[error("{path}: unknown action kind {kind:?}")]
    UnknownAction { path: String, kind: String },
    #[error("{path}: unknown notification template {id:?}")]
    UnknownTemplate { path: String, id: String },
    #[error("{path}: {source}")]
    BadGuard {
        path: String,
        #[source]
        source: GuardError,
    },
    #[error("actor roles {actor:?} may not act on step {node:?} (allowed: {allowed:?})")]
    Permission {
        node: String,
        actor: Vec<String>,
        allowed: Vec<String>,
    },
    #[error("step {node:?}: invalid fields: {}", list_issues(.issues))]
    Validation { node: String, issues: Vec<FieldIssue> },
    #[error("step {node:?}: {} outgoing edges apply (candidates: {candidates:?})", if .candidates.is_empty() { "no" } else { "several" })]
    Transition { node: String, candidates: Vec<String> },
    #[error("instance belongs to workflow {found:?}, not {expected:?}")]
    WrongDefinition { expected: String, found: String },
    #[error("instance is at unknown step {0:?}")]
    UnknownNode(String),
    #[error("history entry {index}: {message}")]
    Audit { index: usize, message: String },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is locked by another writer")]
    Locked { path: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WorkflowError + '_ {
    move |source| WorkflowError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    Text,
    /// `YYYY-MM-DD`.
    Date,
    /// List of strings.
    List,
    Bool,
    Number,
    /// Analysis reference code.
    Refcode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: FieldType,
    #[serde(default)]
    pub mandatory: bool,
}

impl FieldSpec {
    fn check(&self, value: &Value) -> Result<(), String> {
        let ok = match (self.kind, value) {
            (_, Value::Null) => true,
            (FieldType::Text, Value::String(_)) => true,
            (FieldType::Date, Value::String(s)) => {
                return NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map(|_| ())
                    .map_err(|_| format!("{s:?} is not a YYYY-MM-DD date"))
            }
            (FieldType::Refcode, Value::String(s)) => {
                return RefCode::from_str(s).map(|_| ()).map_err(|e| e.to_string());
            }
            (FieldType::List, Value::Array(items)) => items.iter().all(Value::is_string),
            (FieldType::Bool, Value::Bool(_)) => true,
            (FieldType::Number, Value::Number(_)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("expected {}", self.kind.describe()))
        }
    }

    /// Convert command-line text to a value of this field's type.
    pub fn coerce(&self, raw: &str) -> Value {
        match self.kind {
            FieldType::List => Value::Array(
                raw.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| Value::String(s.to_string()))
                    .collect(),
            ),
            FieldType::Bool => match raw {
                "true" | "yes" => Value::Bool(true),
                "false" | "no" => Value::Bool(false),
                _ => Value::String(raw.to_string()),
            },
            FieldType::Number => serde_json::from_str::<serde_json::Number>(raw)
                .map_or_else(|_| Value::String(raw.to_string()), Value::Number),
            _ => Value::String(raw.to_string()),
        }
    }
}

impl FieldType {
    fn describe(self) -> &'static str {
        match self {
            FieldType::Text => "text",
            FieldType::Date => "a date",
            FieldType::List => "a list of strings",
            FieldType::Bool => "true or false",
            FieldType::Number => "a number",
            FieldType::Refcode => "a reference code",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    pub roles_allowed: Vec<String>,
    #[serde(default)]
    pub actions_on_proceed: Vec<ActionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notification: Option<String>,
}

impl Step {
    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn allows(&self, actor: &[String]) -> bool {
        actor.iter().any(|r| self.roles_allowed.contains(r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowDef {
    pub name: String,
    /// Initial step; the first node when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    pub nodes: Vec<Step>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub templates: Vec<NotificationTemplate>,
    /// Role name to the step field that lists its members' addresses.
    #[serde(default)]
    pub role_members: BTreeMap<String, String>,
    #[serde(skip)]
    guards: Vec<Option<Guard>>,
}

/// Parse and validate a workflow definition against the default actions.
pub fn load_workflow(json: &str) -> Result<WorkflowDef, WorkflowError> {
    load_workflow_with(json, &ActionRegistry::default())
}

/// Parse and validate against a custom action registry.
pub fn load_workflow_with(json: &str, actions: &ActionRegistry) -> Result<WorkflowDef, WorkflowError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let mut def: WorkflowDef = serde_path_to_error::deserialize(de).map_err(|e| WorkflowError::Json {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    def.validate(actions)?;
    Ok(def)
}

impl WorkflowDef {
    /// The bundled Phase 0 workflow.
    pub fn phase0() -> Self {
        load_workflow(crate::template::PHASE0_WORKFLOW).expect("bundled workflow is valid")
    }

    fn validate(&mut self, actions: &ActionRegistry) -> Result<(), WorkflowError> {
        if self.nodes.is_empty() {
            return Err(WorkflowError::Json {
                path: "nodes".into(),
                message: "at least one node is required".into(),
            });
        }
        let mut ids = HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !ids.insert(n.id.as_str()) {
                return Err(WorkflowError::DuplicateId {
                    path: format!("nodes[{i}].id"),
                    id: n.id.clone(),
                });
            }
            let mut fields = HashSet::new();
            for (j, f) in n.fields.iter().enumerate() {
                if !fields.insert(f.name.as_str()) {
                    return Err(WorkflowError::DuplicateId {
                        path: format!("nodes[{i}].fields[{j}].name"),
                        id: f.name.clone(),
                    });
                }
            }
        }
        let mut template_ids = HashSet::new();
        for (i, t) in self.templates.iter().enumerate() {
            if !template_ids.insert(t.id.as_str()) {
                return Err(WorkflowError::DuplicateId {
                    path: format!("templates[{i}].id"),
                    id: t.id.clone(),
                });
            }
        }
        if let Some(start) = &self.start {
            if !ids.contains(start.as_str()) {
                return Err(WorkflowError::DanglingEdge {
                    path: "start".into(),
                    node: start.clone(),
                });
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            for (j, a) in n.actions_on_proceed.iter().enumerate() {
                if !actions.contains(&a.kind) {
                    return Err(WorkflowError::UnknownAction {
                        path: format!("nodes[{i}].actions_on_proceed[{j}].kind"),
                        kind: a.kind.clone(),
                    });
                }
            }
            if let Some(t) = &n.notification {
                if !template_ids.contains(t.as_str()) {
                    return Err(WorkflowError::UnknownTemplate {
                        path: format!("nodes[{i}].notification"),
                        id: t.clone(),
                    });
                }
            }
        }
        let mut guards = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            for (end, id) in [("from", &e.from), ("to", &e.to)] {
                if !ids.contains(id.as_str()) {
                    return Err(WorkflowError::DanglingEdge {
                        path: format!("edges[{i}].{end}"),
                        node: id.clone(),
                    });
                }
            }
            let g = match &e.guard {
                None => None,
                Some(text) => Some(Guard::parse(text).map_err(|source| WorkflowError::BadGuard {
                    path: format!("edges[{i}].guard"),
                    source,
                })?),
            };
            guards.push(g);
        }
        self.guards = guards;
        Ok(())
    }

    pub fn start_node(&self) -> &str {
        self.start.as_deref().unwrap_or(&self.nodes[0].id)
    }

    pub fn node(&self, id: &str) -> Option<&Step> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn template(&self, id: &str) -> Option<&NotificationTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Outgoing edges of `node` with their compiled guards.
    fn outgoing<'a>(&'a self, node: &'a str) -> impl Iterator<Item = (&'a Edge, Option<&'a Guard>)> + 'a {
        self.edges
            .iter()
            .zip(&self.guards)
            .filter(move |(e, _)| e.from == node)
            .map(|(e, g)| (e, g.as_ref()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verb {
    Save,
    Proceed,
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verb::Save => "Save",
            Verb::Proceed => "Proceed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub node: String,
    pub actor: Vec<String>,
    pub timestamp: String,
    pub verb: Verb,
    pub data: Map<String, Value>,
    /// Step reached by a Proceed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowInstance {
    pub def_ref: String,
    pub current_node: String,
    pub step_data: BTreeMap<String, Map<String, Value>>,
    pub history: Vec<HistoryEntry>,
}

/// Result of a successful Proceed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proceeded {
    pub instance: WorkflowInstance,
    pub effects: Vec<Effect>,
    pub messages: Vec<Message>,
    pub outbox_files: Vec<PathBuf>,
}

/// Executes a definition against a workspace directory holding the outbox,
/// the effect log and anything the actions create.
#[derive(Debug, Clone)]
pub struct Engine {
    def: WorkflowDef,
    actions: ActionRegistry,
    workspace: PathBuf,
}

pub const OUTBOX_DIR: &str = "outbox";
pub const EFFECT_LOG: &str = "effects.json";

impl Engine {
    pub fn new(def: WorkflowDef, workspace: impl Into<PathBuf>) -> Self {
        Engine {
            def,
            actions: ActionRegistry::default(),
            workspace: workspace.into(),
        }
    }

    pub fn with_actions(mut self, actions: ActionRegistry) -> Self {
        self.actions = actions;
        self
    }

    pub fn def(&self) -> &WorkflowDef {
        &self.def
    }

    pub fn workspace(&self) -> &Path {
        &self.workspace
    }

    pub fn outbox(&self) -> PathBuf {
        self.workspace.join(OUTBOX_DIR)
    }

    pub fn effect_log(&self) -> PathBuf {
        self.workspace.join(EFFECT_LOG)
    }

    pub fn start(&self) -> WorkflowInstance {
        WorkflowInstance {
            def_ref: self.def.name.clone(),
            current_node: self.def.start_node().to_string(),
            step_data: BTreeMap::new(),
            history: Vec::new(),
        }
    }

    fn current<'a>(&'a self, inst: &WorkflowInstance) -> Result<&'a Step, WorkflowError> {
        if inst.def_ref != self.def.name {
            return Err(WorkflowError::WrongDefinition {
                expected: self.def.name.clone(),
                found: inst.def_ref.clone(),
            });
        }
        self.def
            .node(&inst.current_node)
            .ok_or_else(|| WorkflowError::UnknownNode(inst.current_node.clone()))
    }

    fn authorize(step: &Step, actor: &[String]) -> Result<(), WorkflowError> {
        if step.allows(actor) {
            Ok(())
        } else {
            Err(WorkflowError::Permission {
                node: step.id.clone(),
                actor: actor.to_vec(),
                allowed: step.roles_allowed.clone(),
            })
        }
    }

    fn merged(step: &Step, inst: &WorkflowInstance, data: &Map<String, Value>) -> Result<Map<String, Value>, WorkflowError> {
        let mut issues = Vec::new();
        for (k, v) in data {
            match step.field(k) {
                None => issues.push(FieldIssue {
                    field: k.clone(),
                    message: "not a field of this step".into(),
                }),
                Some(spec) => {
                    if let Err(message) = spec.check(v) {
                        issues.push(FieldIssue {
                            field: k.clone(),
                            message,
                        });
                    }
                }
            }
        }
        if !issues.is_empty() {
            return Err(WorkflowError::Validation {
                node: step.id.clone(),
                issues,
            });
        }
        let mut merged = inst.step_data.get(&step.id).cloned().unwrap_or_default();
        for (k, v) in data {
            if v.is_null() {
                merged.remove(k);
            } else {
                merged.insert(k.clone(), v.clone());
            }
        }
        Ok(merged)
    }

    /// Values visible to guards and templates: every step's data, the
    /// current step's values taking precedence.
    pub fn context(&self, inst: &WorkflowInstance) -> Map<String, Value> {
        let mut ctx = Map::new();
        for node in &self.def.nodes {
            if node.id == inst.current_node {
                continue;
            }
            if let Some(d) = inst.step_data.get(&node.id) {
                ctx.extend(d.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
        }
        if let Some(d) = inst.step_data.get(&inst.current_node) {
            ctx.extend(d.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        ctx
    }

    fn apply_save(
        &self,
        inst: &WorkflowInstance,
        actor: &[String],
        data: Map<String, Value>,
        timestamp: String,
    ) -> Result<WorkflowInstance, WorkflowError> {
        let step = self.current(inst)?;
        Self::authorize(step, actor)?;
        let merged = Self::merged(step, inst, &data)?;
        let mut next = inst.clone();
        next.step_data.insert(step.id.clone(), merged);
        next.history.push(HistoryEntry {
            node: step.id.clone(),
            actor: actor.to_vec(),
            timestamp,
            verb: Verb::Save,
            data,
            to: None,
        });
        Ok(next)
    }

    /// Validate a Proceed and pick the successor without side effects.
    fn plan_proceed(
        &self,
        inst: &WorkflowInstance,
        actor: &[String],
        data: Map<String, Value>,
        timestamp: String,
    ) -> Result<WorkflowInstance, WorkflowError> {
        let step = self.current(inst)?;
        Self::authorize(step, actor)?;
        let merged = Self::merged(step, inst, &data)?;
        let missing: Vec<FieldIssue> = step
            .fields
            .iter()
            .filter(|f| f.mandatory && merged.get(&f.name).is_none_or(Value::is_null))
            .map(|f| FieldIssue {
                field: f.name.clone(),
                message: "mandatory field is missing".into(),
            })
            .collect();
        if !missing.is_empty() {
            return Err(WorkflowError::Validation {
                node: step.id.clone(),
                issues: missing,
            });
        }
        let mut next = inst.clone();
        next.step_data.insert(step.id.clone(), merged);
        let ctx = self.context(&next);
        let candidates: Vec<&Edge> = self
            .def
            .outgoing(&step.id)
            .filter(|(_, g)| g.is_none_or(|g| g.eval(&ctx)))
            .map(|(e, _)| e)
            .collect();
        if candidates.len() != 1 {
            return Err(WorkflowError::Transition {
                node: step.id.clone(),
                candidates: candidates.iter().map(|e| e.to.clone()).collect(),
            });
        }
        let to = candidates[0].to.clone();
        next.history.push(HistoryEntry {
            node: step.id.clone(),
            actor: actor.to_vec(),
            timestamp,
            verb: Verb::Proceed,
            data,
            to: Some(to.clone()),
        });
        next.current_node = to;
        Ok(next)
    }

    /// Store `data` on the current step without moving.
    pub fn save(
        &self,
        inst: &WorkflowInstance,
        actor: &[String],
        data: Map<String, Value>,
    ) -> Result<WorkflowInstance, WorkflowError> {
        self.apply_save(inst, actor, data, now())
    }

    /// Store `data`, then move along the single applicable edge, running the
    /// step's actions and rendering its notification into the outbox.
    pub fn proceed(
        &self,
        inst: &WorkflowInstance,
        actor: &[String],
        data: Map<String, Value>,
    ) -> Result<Proceeded, WorkflowError> {
        let next = self.plan_proceed(inst, actor, data, now())?;
        let step = self.current(inst)?;
        let mut ctx = self.context(&next);
        ctx.entry("step_title").or_insert_with(|| Value::String(step.title.clone()));
        ctx.entry("next_step").or_insert_with(|| Value::String(next.current_node.clone()));

        let messages = match &step.notification {
            Some(id) => {
                let t = self.def.template(id).expect("templates validated at load");
                vec![render_notification(t, &ctx, &self.def.role_members)?]
            }
            None => Vec::new(),
        };
        let rendered: Vec<(&str, Map<String, Value>)> = step
            .actions_on_proceed
            .iter()
            .map(|a| {
                let params = render_value(&Value::Object(a.params.clone()), &ctx)?;
                Ok((a.kind.as_str(), params.as_object().cloned().unwrap_or_default()))
            })
            .collect::<Result<_, RenderError>>()?;

        fs::create_dir_all(&self.workspace).map_err(io_err(&self.workspace))?;
        let env = ActionEnv {
            workspace: &self.workspace,
            node: &step.id,
        };
        let mut effects = Vec::new();
        for (kind, params) in &rendered {
            effects.push(self.actions.run(kind, params, env)?);
        }
        if !effects.is_empty() {
            append_effects(&self.effect_log(), &effects)?;
        }
        let outbox = self.outbox();
        let outbox_files = messages
            .iter()
            .map(|m| write_outbox(&outbox, m).map_err(io_err(&outbox)))
            .collect::<Result<_, _>>()?;
        Ok(Proceeded {
            instance: next,
            effects,
            messages,
            outbox_files,
        })
    }

    /// Re-execute `history` from the start without side effects.
    pub fn replay(&self, history: &[HistoryEntry]) -> Result<WorkflowInstance, WorkflowError> {
        let mut inst = self.start();
        for (index, h) in history.iter().enumerate() {
            if h.node != inst.current_node {
                return Err(WorkflowError::Audit {
                    index,
                    message: format!("entry is at {:?} but replay is at {:?}", h.node, inst.current_node),
                });
            }
            inst = match h.verb {
                Verb::Save => self.apply_save(&inst, &h.actor, h.data.clone(), h.timestamp.clone())?,
                Verb::Proceed => {
                    let next = self.plan_proceed(&inst, &h.actor, h.data.clone(), h.timestamp.clone())?;
                    if h.to.as_deref().is_some_and(|to| to != next.current_node) {
                        return Err(WorkflowError::Audit {
                            index,
                            message: format!("recorded target {:?} but replay reached {:?}", h.to, next.current_node),
                        });
                    }
                    next
                }
            };
        }
        Ok(inst)
    }

    /// Check that every history entry was permitted and that every Proceed
    /// followed an existing edge.
    pub fn audit(&self, inst: &WorkflowInstance) -> Result<(), WorkflowError> {
        let mut at = self.def.start_node().to_string();
        for (index, h) in inst.history.iter().enumerate() {
            let fail = |message: String| WorkflowError::Audit { index, message };
            if h.node != at {
                return Err(fail(format!("entry is at {:?}, expected {at:?}", h.node)));
            }
            let step = self.def.node(&h.node).ok_or_else(|| fail(format!("unknown step {:?}", h.node)))?;
            if !step.allows(&h.actor) {
                return Err(fail(format!("actor {:?} lacks a role allowed at {:?}", h.actor, h.node)));
            }
            if h.verb == Verb::Proceed {
                let to = h.to.as_deref().ok_or_else(|| fail("Proceed without target".into()))?;
                if !self.def.edges.iter().any(|e| e.from == h.node && e.to == to) {
                    return Err(fail(format!("no edge {:?} -> {to:?}", h.node)));
                }
                at = to.to_string();
            }
        }
        if at != inst.current_node {
            return Err(WorkflowError::Audit {
                index: inst.history.len(),
                message: format!("history ends at {at:?} but instance is at {:?}", inst.current_node),
            });
        }
        Ok(())
    }

    /// Parse `key=value` pairs against the current step's field types.
    pub fn parse_assignments(
        &self,
        inst: &WorkflowInstance,
        pairs: &[String],
    ) -> Result<Map<String, Value>, WorkflowError> {
        let step = self.current(inst)?;
        let mut data = Map::new();
        let mut issues = Vec::new();
        for pair in pairs {
            let Some((k, v)) = pair.split_once('=') else {
                issues.push(FieldIssue {
                    field: pair.clone(),
                    message: "expected key=value".into(),
                });
                continue;
            };
            let value = match step.field(k.trim()) {
                Some(spec) => spec.coerce(v),
                None => Value::String(v.to_string()),
            };
            data.insert(k.trim().to_string(), value);
        }
        if issues.is_empty() {
            Ok(data)
        } else {
            Err(WorkflowError::Validation {
                node: step.id.clone(),
                issues,
            })
        }
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn append_effects(log: &Path, effects: &[Effect]) -> Result<(), WorkflowError> {
    let mut all = read_effects(log)?;
    all.extend_from_slice(effects);
    let mut json = serde_json::to_string_pretty(&all).expect("effects serialize");
    json.push('\n');
    write_atomic(log, json.as_bytes()).map_err(io_err(log))
}

/// Effects recorded so far in a workspace log.
pub fn read_effects(log: &Path) -> Result<Vec<Effect>, WorkflowError> {
    match fs::read_to_string(log) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| WorkflowError::Json {
            path: log.display().to_string(),
            message: e.to_string(),
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(log)(e)),
    }
}

pub fn load_instance(path: &Path) -> Result<WorkflowInstance, WorkflowError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| WorkflowError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Persist with write-temp-then-rename.
pub fn save_instance(path: &Path, inst: &WorkflowInstance) -> Result<(), WorkflowError> {
    let mut json = serde_json::to_string_pretty(inst).expect("instance serializes");
    json.push('\n');
    write_atomic(path, json.as_bytes()).map_err(io_err(path))
}

static IN_PROCESS: Mutex<()> = Mutex::new(());

const LOCK_TIMEOUT: Duration = Duration::from_secs(10);

struct LockFile(PathBuf);

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn acquire(path: &Path) -> Result<LockFile, WorkflowError> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    let lock = path.with_file_name(name);
    let deadline = Instant::now() + LOCK_TIMEOUT;
    loop {
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => return Ok(LockFile(lock)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                if Instant::now() > deadline {
                    return Err(WorkflowError::Locked {
                        path: path.display().to_string(),
                    });
                }
                std::thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(io_err(&lock)(e)),
        }
    }
}

/// Load the instance at `path`, apply `f`, and persist the result while
/// holding the instance lock, so concurrent writers are serialized.
pub fn update_instance<T>(
    path: &Path,
    f: impl FnOnce(&WorkflowInstance) -> Result<(WorkflowInstance, T), WorkflowError>,
) -> Result<T, WorkflowError> {
    let _guard = IN_PROCESS.lock().unwrap_or_else(|p| p.into_inner());
    let _lock = acquire(path)?;
    let current = load_instance(path)?;
    let (next, out) = f(&current)?;
    save_instance(path, &next)?;
    Ok(out)
}

/// Number of times each node was entered by a Proceed, for reporting.
pub fn visits(inst: &WorkflowInstance) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for h in &inst.history {
        if let Some(to) = &h.to {
            *m.entry(to.as_str()).or_default() += 1;
        }
    }
    m
}
