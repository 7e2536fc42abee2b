//! Notification templates rendered into an outbox directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::fsutil::write_atomic;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("placeholder {{{{{0}}}}} has no value in the context")]
    Unresolved(String),
    #[error("recipient role {0:?} is not mapped to a member field")]
    UnknownRole(String),
    #[error("recipient role {role:?}: field {field:?} holds no addresses")]
    NoMembers { role: String, field: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotificationTemplate {
    pub id: String,
    /// `role:<name>` expressions or literal addresses.
    pub recipients: Vec<String>,
    pub subject: String,
    pub body: String,
}

/// A rendered notification as written to the outbox.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub template: String,
    pub to: Vec<String>,
    pub subject: String,
    pub body: String,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*([A-Za-z0-9_.]+)\s*\}\}").expect("valid pattern"))
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

/// Replace every `{{name}}` in `template` from `ctx`.
pub fn render_string(template: &str, ctx: &Map<String, Value>) -> Result<String, RenderError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for caps in placeholder_re().captures_iter(template) {
        let whole = caps.get(0).expect("group 0");
        let name = &caps[1];
        let value = ctx
            .get(name)
            .filter(|v| !v.is_null())
            .ok_or_else(|| RenderError::Unresolved(name.to_string()))?;
        out.push_str(&template[last..whole.start()]);
        out.push_str(&scalar_text(value));
        last = whole.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

/// Render strings inside `value`. A string that is exactly one placeholder
/// takes the referenced value unchanged, so lists stay lists.
pub fn render_value(value: &Value, ctx: &Map<String, Value>) -> Result<Value, RenderError> {
    Ok(match value {
        Value::String(s) => {
            let trimmed = s.trim();
            match placeholder_re().captures(trimmed) {
                Some(c) if c.get(0).expect("group 0").as_str() == trimmed => ctx
                    .get(&c[1])
                    .filter(|v| !v.is_null())
                    .cloned()
                    .ok_or_else(|| RenderError::Unresolved(c[1].to_string()))?,
                _ => Value::String(render_string(s, ctx)?),
            }
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| render_value(v, ctx)).collect::<Result<_, _>>()?),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| Ok((k.clone(), render_value(v, ctx)?)))
                .collect::<Result<_, RenderError>>()?,
        ),
        other => other.clone(),
    })
}

/// Render `template`, resolving `role:<name>` recipients through
/// `role_members` (role → context field holding addresses).
pub fn render_notification(
    template: &NotificationTemplate,
    ctx: &Map<String, Value>,
    role_members: &BTreeMap<String, String>,
) -> Result<Message, RenderError> {
    let mut to = Vec::new();
    for expr in &template.recipients {
        match expr.strip_prefix("role:") {
            Some(role) => {
                let field = role_members
                    .get(role)
                    .ok_or_else(|| RenderError::UnknownRole(role.to_string()))?;
                let addresses: Vec<String> = match ctx.get(field) {
                    Some(Value::Array(items)) => items.iter().filter_map(|v| v.as_str().map(str::to_string)).collect(),
                    Some(Value::String(s)) if !s.is_empty() => vec![s.clone()],
                    _ => Vec::new(),
                };
                if addresses.is_empty() {
                    return Err(RenderError::NoMembers {
                        role: role.to_string(),
                        field: field.clone(),
                    });
                }
                to.extend(addresses);
            }
            None => to.push(render_string(expr, ctx)?),
        }
    }
    let mut seen = std::collections::HashSet::new();
    to.retain(|a| seen.insert(a.clone()));
    Ok(Message {
        template: template.id.clone(),
        to,
        subject: render_string(&template.subject, ctx)?,
        body: render_string(&template.body, ctx)?,
    })
}

/// Write `message` as the next numbered JSON file in `outbox`.
pub fn write_outbox(outbox: &Path, message: &Message) -> std::io::Result<PathBuf> {
    fs::create_dir_all(outbox)?;
    let count = fs::read_dir(outbox)?
        .filter_map(Result::ok)
        .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
        .count();
    let path = outbox.join(format!("{:04}-{}.json", count + 1, message.template));
    let mut json = serde_json::to_string_pretty(message).map_err(std::io::Error::other)?;
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}

/// Messages in the outbox in file order.
pub fn read_outbox(outbox: &Path) -> std::io::Result<Vec<Message>> {
    let mut paths: Vec<PathBuf> = match fs::read_dir(outbox) {
        Ok(rd) => rd
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(std::io::Error::other)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn tpl(recipients: &[&str], subject: &str) -> NotificationTemplate {
        NotificationTemplate {
            id: "t".into(),
            recipients: recipients.iter().map(|s| s.to_string()).collect(),
            subject: subject.into(),
            body: "on {{date}}".into(),
        }
    }

    #[test]
    fn subject_substitution() {
        let ctx = json!({"title": "Dijet search", "date": "2020-01-01"});
        let m = render_notification(&tpl(&["a@x"], "EB appointed: {{title}}"), ctx.as_object().unwrap(), &BTreeMap::new())
            .unwrap();
        assert_eq!(m.subject, "EB appointed: Dijet search");
        assert_eq!(m.body, "on 2020-01-01");
    }

    #[test]
    fn missing_placeholder_named() {
        let ctx = json!({"title": "x"});
        let e = render_notification(&tpl(&[], "{{title}}"), ctx.as_object().unwrap(), &BTreeMap::new()).unwrap_err();
        assert_eq!(e, RenderError::Unresolved("date".into()));
        assert!(e.to_string().contains("{{date}}"));
    }

    #[test]
    fn role_resolution() {
        let ctx = json!({"eb": ["a@cern.ch", "b@cern.ch", "c@cern.ch"], "date": "d"});
        let roles = BTreeMap::from([("EB".to_string(), "eb".to_string())]);
        let m = render_notification(&tpl(&["role:EB"], "s"), ctx.as_object().unwrap(), &roles).unwrap();
        assert_eq!(m.to.len(), 3);
        assert!(matches!(
            render_notification(&tpl(&["role:SP"], "s"), ctx.as_object().unwrap(), &roles),
            Err(RenderError::UnknownRole(_))
        ));
    }

    #[test]
    fn whole_placeholder_keeps_lists() {
        let ctx = json!({"m": ["a", "b"], "n": "x"});
        let v = render_value(&json!({"members": "{{m}}", "label": "g-{{n}}"}), ctx.as_object().unwrap()).unwrap();
        assert_eq!(v, json!({"members": ["a", "b"], "label": "g-x"}));
    }

    #[test]
    fn outbox_numbering() {
        let dir = tempfile::tempdir().unwrap();
        let m = Message {
            template: "t".into(),
            to: vec!["a".into()],
            subject: "s".into(),
            body: "b".into(),
        };
        let p1 = write_outbox(dir.path(), &m).unwrap();
        let p2 = write_outbox(dir.path(), &m).unwrap();
        assert!(p1.ends_with("0001-t.json") && p2.ends_with("0002-t.json"));
        assert_eq!(read_outbox(dir.path()).unwrap().len(), 2);
    }
}
