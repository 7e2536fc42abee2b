//! Built-in job kinds of the editing and submission suites.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;

use super::{Artifact, Job, JobContext, JobOutcome, JobRegistry};
use crate::flatten::{
    archive_path, build_submission, inline_inputs, sidecar_path, strip_comments, write_tarball, Profile,
    TexProject, DEFAULT_VERBATIM_ENVS,
};
use crate::refcode::RefCode;

/// Version reported by `version_check` unless the context overrides it.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub(super) fn register_builtin(r: &mut JobRegistry) {
    r.register("version_check", VersionCheck)
        .register("latex_checks", LatexChecks)
        .register("rules_check", RulesCheck)
        .register("build_check", BuildCheck)
        .register("flatten", FlattenJob)
        .register("failure_summary", FailureSummary);
}

/// Style-rule inventory consumed by `latex_checks` and `rules_check`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleRules {
    pub forbidden_commands: Vec<String>,
    pub float_environments: Vec<String>,
    pub allowed_placements: String,
    pub forbidden_placements: Vec<String>,
    pub required_sections: Vec<String>,
}

impl StyleRules {
    pub fn bundled() -> Self {
        serde_json::from_str(crate::template::STYLE_RULES).expect("bundled rules parse")
    }

    /// Bundled rules with the keys of `params` (an object or null) replaced.
    pub fn with_overrides(params: &serde_json::Value) -> Result<Self, String> {
        let mut base: serde_json::Value =
            serde_json::from_str(crate::template::STYLE_RULES).expect("bundled rules parse");
        match params {
            serde_json::Value::Null => {}
            serde_json::Value::Object(map) => {
                let obj = base.as_object_mut().expect("rules are an object");
                for (k, v) in map {
                    obj.insert(k.clone(), v.clone());
                }
            }
            other => return Err(format!("params must be an object, got {other}")),
        }
        serde_json::from_value(base).map_err(|e| e.to_string())
    }
}

/// Flattened, comment-free source with the 1-based line of each line.
fn prepared_source(project: &TexProject) -> Result<String, String> {
    inline_inputs(project).map(|t| strip_comments(&t)).map_err(|e| e.to_string())
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset].matches('\n').count() + 1
}

/// Occurrences of `\name` not followed by another letter.
fn find_command(text: &str, name: &str) -> Vec<usize> {
    let mut hits = Vec::new();
    let mut from = 0;
    while let Some(pos) = text[from..].find(name) {
        let at = from + pos;
        let end = at + name.len();
        let escaped = at > 0 && text.as_bytes()[at - 1] == b'\\';
        let continues = text[end..].chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        if !escaped && !continues {
            hits.push(at);
        }
        from = end;
    }
    hits
}

struct VersionCheck;

fn parse_min_version(params: &serde_json::Value) -> Result<semver::Version, String> {
    let raw = params
        .get("min_version")
        .and_then(|v| v.as_str())
        .ok_or_else(|| "missing string param min_version".to_string())?;
    semver::Version::parse(raw).map_err(|e| format!("min_version {raw:?}: {e}"))
}

impl Job for VersionCheck {
    fn validate(&self, params: &serde_json::Value) -> Result<(), String> {
        parse_min_version(params).map(|_| ())
    }

    fn run(&self, _: &TexProject, params: &serde_json::Value, ctx: &JobContext) -> JobOutcome {
        let min = match parse_min_version(params) {
            Ok(v) => v,
            Err(e) => return JobOutcome::from_diagnostics(vec![e]),
        };
        let raw = ctx.var("toolkit_version").unwrap_or(TOOLKIT_VERSION);
        match semver::Version::parse(raw) {
            Ok(v) if v >= min => JobOutcome::from_diagnostics(vec![]),
            Ok(v) => JobOutcome::from_diagnostics(vec![format!(
                "toolkit version {v} is older than the required {min}"
            )]),
            Err(e) => JobOutcome::from_diagnostics(vec![format!("toolkit version {raw:?}: {e}")]),
        }
    }
}

struct LatexChecks;

fn float_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\begin\{([A-Za-z]+\*?)\}(?:\[([^\]]*)\])?").expect("valid pattern"))
}

impl Job for LatexChecks {
    fn validate(&self, params: &serde_json::Value) -> Result<(), String> {
        StyleRules::with_overrides(params).map(|_| ())
    }

    fn run(&self, project: &TexProject, params: &serde_json::Value, _: &JobContext) -> JobOutcome {
        let rules = match StyleRules::with_overrides(params) {
            Ok(r) => r,
            Err(e) => return JobOutcome::from_diagnostics(vec![e]),
        };
        let tex = match prepared_source(project) {
            Ok(t) => t,
            Err(e) => return JobOutcome::from_diagnostics(vec![e]),
        };
        let mut diags = Vec::new();
        for cmd in &rules.forbidden_commands {
            for at in find_command(&tex, cmd) {
                diags.push(format!("line {}: forbidden command {cmd}", line_of(&tex, at)));
            }
        }
        for caps in float_re().captures_iter(&tex) {
            let env = &caps[1];
            if !rules.float_environments.iter().any(|e| e == env) {
                continue;
            }
            let Some(placement) = caps.get(2) else { continue };
            let p = placement.as_str().trim();
            let line = line_of(&tex, placement.start());
            if rules.forbidden_placements.iter().any(|f| f == p) {
                diags.push(format!("line {line}: {env} placement [{p}] is not allowed"));
            } else if let Some(c) = p.chars().find(|c| !rules.allowed_placements.contains(*c)) {
                diags.push(format!("line {line}: {env} placement [{p}] uses unknown specifier {c:?}"));
            }
        }
        diags.sort_by_key(|d| {
            d.strip_prefix("line ")
                .and_then(|r| r.split(':').next())
                .and_then(|n| n.parse::<usize>().ok())
                .unwrap_or(0)
        });
        JobOutcome::from_diagnostics(diags)
    }
}

struct RulesCheck;

fn section_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\section\*?\s*\{([^}]*)\}").expect("valid pattern"))
}

fn refcode_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\AtlasRefCode\s*\{([^}]*)\}").expect("valid pattern"))
}

impl Job for RulesCheck {
    fn validate(&self, params: &serde_json::Value) -> Result<(), String> {
        StyleRules::with_overrides(params).map(|_| ())
    }

    fn run(&self, project: &TexProject, params: &serde_json::Value, _: &JobContext) -> JobOutcome {
        let rules = match StyleRules::with_overrides(params) {
            Ok(r) => r,
            Err(e) => return JobOutcome::from_diagnostics(vec![e]),
        };
        let tex = match prepared_source(project) {
            Ok(t) => t,
            Err(e) => return JobOutcome::from_diagnostics(vec![e]),
        };
        let mut diags = Vec::new();
        let present: BTreeSet<String> = section_re()
            .captures_iter(&tex)
            .map(|c| c[1].trim().to_lowercase())
            .collect();
        for required in &rules.required_sections {
            if !present.contains(&required.to_lowercase()) {
                diags.push(format!("required section {required:?} is missing"));
            }
        }
        match refcode_re().captures(&tex) {
            None => diags.push("no \\AtlasRefCode{...} in the document header".to_string()),
            Some(caps) => {
                if let Err(e) = caps[1].trim().parse::<RefCode>() {
                    diags.push(e.to_string());
                }
            }
        }
        JobOutcome::from_diagnostics(diags)
    }
}

struct BuildCheck;

fn env_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\(begin|end)\s*\{([^}]*)\}").expect("valid pattern"))
}

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\label\s*\{([^}]*)\}").expect("valid pattern"))
}

fn ref_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\(?:ref|eqref|autoref|pageref|cref|Cref)\s*\{([^}]*)\}").expect("valid pattern"))
}

fn cite_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\cite[A-Za-z]*\s*(?:\[[^\]]*\]\s*)*\{([^}]*)\}").expect("valid pattern"))
}

fn bib_key_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"@[A-Za-z]+\s*\{\s*([^,\s]+)\s*,").expect("valid pattern"))
}

/// Remove verbatim bodies (keeping line breaks) so their braces and
/// environment names are not checked.
fn blank_verbatim(tex: &str) -> String {
    let mut out = String::with_capacity(tex.len());
    let mut rest = tex;
    loop {
        let next = DEFAULT_VERBATIM_ENVS
            .iter()
            .filter_map(|e| rest.find(&format!("\\begin{{{e}}}")).map(|p| (p, *e)))
            .min_by_key(|(p, _)| *p);
        let Some((pos, env)) = next else {
            out.push_str(rest);
            return out;
        };
        let open = format!("\\begin{{{env}}}");
        let close = format!("\\end{{{env}}}");
        let body_start = pos + open.len();
        out.push_str(&rest[..body_start]);
        match rest[body_start..].find(&close) {
            Some(end) => {
                let body = &rest[body_start..body_start + end];
                out.extend(body.chars().filter(|c| *c == '\n'));
                rest = &rest[body_start + end..];
            }
            None => {
                // unterminated: leave the rest for the balance check to report
                out.push_str(&rest[body_start..]);
                return out;
            }
        }
    }
}

fn check_environments(tex: &str, diags: &mut Vec<String>) {
    let mut stack: Vec<(String, usize)> = Vec::new();
    for caps in env_re().captures_iter(tex) {
        let name = caps[2].trim().to_string();
        let line = line_of(tex, caps.get(0).expect("group 0").start());
        if &caps[1] == "begin" {
            stack.push((name, line));
            continue;
        }
        match stack.pop() {
            Some((open, _)) if open == name => {}
            Some((open, open_line)) => {
                diags.push(format!(
                    "line {line}: \\end{{{name}}} closes \\begin{{{open}}} opened at line {open_line}"
                ));
            }
            None => diags.push(format!("line {line}: \\end{{{name}}} has no matching \\begin")),
        }
    }
    for (name, line) in stack {
        diags.push(format!("line {line}: unbalanced \\begin{{{name}}} is never closed"));
    }
}

fn check_braces(tex: &str, diags: &mut Vec<String>) {
    let mut depth: i64 = 0;
    let mut opens: Vec<usize> = Vec::new();
    let bytes = tex.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 1,
            b'{' => {
                depth += 1;
                opens.push(i);
            }
            b'}' => {
                if depth == 0 {
                    diags.push(format!("line {}: unmatched closing brace", line_of(tex, i)));
                } else {
                    depth -= 1;
                    opens.pop();
                }
            }
            _ => {}
        }
        i += 1;
    }
    for at in opens {
        diags.push(format!("line {}: unmatched opening brace", line_of(tex, at)));
    }
}

fn split_keys(list: &str) -> impl Iterator<Item = &str> {
    list.split(',').map(str::trim).filter(|k| !k.is_empty())
}

fn bib_keys(project: &TexProject) -> BTreeSet<String> {
    let mut keys = BTreeSet::new();
    let is_aux = |p: &str| project.auxiliary.iter().any(|a| p.starts_with(a.as_str()));
    let texts = project
        .assets
        .iter()
        .filter(|(p, _)| p.ends_with(".bib") && !is_aux(p))
        .map(|(_, b)| String::from_utf8_lossy(b).into_owned())
        .chain(
            project
                .files
                .iter()
                .filter(|(p, _)| p.ends_with(".bib") && !is_aux(p))
                .map(|(_, t)| t.clone()),
        );
    for text in texts {
        keys.extend(bib_key_re().captures_iter(&text).map(|c| c[1].to_string()));
    }
    keys
}

fn engine_command(params: &serde_json::Value, ctx: &JobContext) -> Option<Vec<String>> {
    if let Some(list) = params.get("engine").and_then(|v| v.as_array()) {
        return Some(list.iter().filter_map(|v| v.as_str().map(str::to_string)).collect());
    }
    ctx.var("tex_engine")
        .map(|s| s.split_whitespace().map(str::to_string).collect())
}

fn run_engine(project: &TexProject, command: &[String]) -> Result<(), String> {
    let (program, args) = command.split_first().ok_or("empty engine command")?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    project.write_to(dir.path()).map_err(|e| e.to_string())?;
    let status = Command::new(program)
        .args(args)
        .arg(&project.root_file)
        .current_dir(dir.path())
        .output()
        .map_err(|e| format!("engine {program:?} could not be started: {e}"))?;
    if status.status.success() {
        Ok(())
    } else {
        let tail: Vec<&str> = std::str::from_utf8(&status.stdout)
            .unwrap_or_default()
            .lines()
            .rev()
            .take(5)
            .collect();
        Err(format!(
            "engine {program:?} exited with {}: {}",
            status.status,
            tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
        ))
    }
}

impl Job for BuildCheck {
    fn validate(&self, params: &serde_json::Value) -> Result<(), String> {
        match params.get("engine") {
            None => Ok(()),
            Some(serde_json::Value::Array(a)) if !a.is_empty() && a.iter().all(|v| v.is_string()) => Ok(()),
            Some(_) => Err("engine must be a non-empty list of strings".to_string()),
        }
    }

    fn run(&self, project: &TexProject, params: &serde_json::Value, ctx: &JobContext) -> JobOutcome {
        let tex = match prepared_source(project) {
            Ok(t) => blank_verbatim(&t),
            Err(e) => return JobOutcome::from_diagnostics(vec![e]),
        };
        let mut diags = Vec::new();
        check_environments(&tex, &mut diags);
        check_braces(&tex, &mut diags);

        let labels: BTreeSet<&str> = label_re()
            .captures_iter(&tex)
            .map(|c| c.get(1).expect("group 1").as_str().trim())
            .collect();
        for caps in ref_re().captures_iter(&tex) {
            let line = line_of(&tex, caps.get(0).expect("group 0").start());
            for key in split_keys(caps.get(1).expect("group 1").as_str()) {
                if !labels.contains(key) {
                    diags.push(format!("line {line}: reference to undefined label {key:?}"));
                }
            }
        }
        let bib = bib_keys(project);
        for caps in cite_re().captures_iter(&tex) {
            let line = line_of(&tex, caps.get(0).expect("group 0").start());
            for key in split_keys(caps.get(1).expect("group 1").as_str()) {
                if !bib.contains(key) {
                    diags.push(format!("line {line}: citation {key:?} not found in any .bib file"));
                }
            }
        }
        if diags.is_empty() {
            if let Some(cmd) = engine_command(params, ctx) {
                if let Err(e) = run_engine(project, &cmd) {
                    diags.push(e);
                }
            }
        }
        JobOutcome::from_diagnostics(diags)
    }
}

struct FlattenJob;

fn profile_param(params: &serde_json::Value) -> Result<Profile, String> {
    params
        .get("profile")
        .and_then(|v| v.as_str())
        .ok_or_else(|| "missing string param profile".to_string())?
        .parse()
        .map_err(|e: crate::flatten::FlattenError| e.to_string())
}

impl Job for FlattenJob {
    fn validate(&self, params: &serde_json::Value) -> Result<(), String> {
        profile_param(params).map(|_| ())
    }

    fn run(&self, project: &TexProject, params: &serde_json::Value, ctx: &JobContext) -> JobOutcome {
        let profile = match profile_param(params) {
            Ok(p) => p,
            Err(e) => return JobOutcome::from_diagnostics(vec![e]),
        };
        let result = match build_submission(project, profile) {
            Ok(r) => r,
            Err(e) => return JobOutcome::from_diagnostics(vec![e.to_string()]),
        };
        let root_stem = project
            .root_file
            .rsplit('/')
            .next()
            .unwrap_or(&project.root_file)
            .trim_end_matches(".tex")
            .to_string();
        let stem = ctx.var("stem").unwrap_or(&root_stem);
        let name_only = archive_path(Path::new(""), stem, profile);
        let archive_name = name_only.to_string_lossy().into_owned();
        let manifest_name = sidecar_path(&name_only).to_string_lossy().into_owned();
        let mut outcome = JobOutcome {
            passed: true,
            diagnostics: Vec::new(),
            artifacts: vec![
                Artifact {
                    name: archive_name,
                    path: None,
                },
                Artifact {
                    name: manifest_name,
                    path: None,
                },
            ],
        };
        if let Some(dir) = ctx.var("artifacts_dir") {
            let archive = archive_path(Path::new(dir), stem, profile);
            if let Err(e) = write_tarball(&result, &archive) {
                return JobOutcome::from_diagnostics(vec![e.to_string()]);
            }
            outcome.artifacts[0].path = Some(archive.display().to_string());
            outcome.artifacts[1].path = Some(sidecar_path(&archive).display().to_string());
        }
        outcome
    }
}

struct FailureSummary;

impl Job for FailureSummary {
    fn run(&self, _: &TexProject, _: &serde_json::Value, ctx: &JobContext) -> JobOutcome {
        JobOutcome {
            passed: true,
            diagnostics: ctx
                .failed_stages
                .iter()
                .map(|s| format!("stage {s} failed"))
                .collect(),
            artifacts: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::instantiate;

    fn run(job: &dyn Job, project: &TexProject) -> JobOutcome {
        job.run(project, &serde_json::Value::Null, &JobContext::default())
    }

    fn doc(body: &str) -> TexProject {
        TexProject::new("main.tex").with_file("main.tex", body)
    }

    #[test]
    fn template_passes_every_check() {
        let p = instantiate("ANA-SUSY-2019-04-PAPER");
        for job in [&LatexChecks as &dyn Job, &RulesCheck, &BuildCheck] {
            let o = run(job, &p);
            assert!(o.passed, "{:?}", o.diagnostics);
        }
    }

    #[test]
    fn refcode_grammar() {
        let body = |code: &str| {
            doc(&format!(
                "\\AtlasRefCode{{{code}}}\n\\section{{Introduction}}\n\\section{{Conclusion}}\n"
            ))
        };
        assert!(run(&RulesCheck, &body("ANA-SUSY-2019-04")).passed);
        let bad = run(&RulesCheck, &body("ANA-SUSY-19-4"));
        assert!(!bad.passed);
        assert!(bad.diagnostics[0].contains("ANA-SUSY-19-4"), "{:?}", bad.diagnostics);
    }

    #[test]
    fn missing_section_named() {
        let o = run(&RulesCheck, &doc("\\AtlasRefCode{ANA-SUSY-2019-04}\n\\section{Introduction}\n"));
        assert_eq!(o.diagnostics, ["required section \"Conclusion\" is missing"]);
    }

    #[test]
    fn unbalanced_environment_named() {
        let o = run(&BuildCheck, &doc("a\n\\begin{figure}\nx\n"));
        assert!(!o.passed);
        assert!(o.diagnostics.iter().any(|d| d.contains("\\begin{figure}")), "{:?}", o.diagnostics);
    }

    #[test]
    fn labels_citations_and_braces() {
        let o = run(&BuildCheck, &doc("\\ref{nope} \\cite{Missing} {\n"));
        assert_eq!(o.diagnostics.len(), 3, "{:?}", o.diagnostics);
        let ok = run(
            &BuildCheck,
            &doc("\\label{a}\\ref{a} \\{ \\begin{verbatim}{\\end{foo}\\end{verbatim}\n"),
        );
        assert!(ok.passed, "{:?}", ok.diagnostics);
    }

    #[test]
    fn style_lints() {
        let o = run(
            &LatexChecks,
            &doc("\\vspace{1cm}\n\\bfseries\n% \\newpage\n\\begin{figure}[H]\n\\end{figure}\n\\begin{table}[tx]\\end{table}\n"),
        );
        assert_eq!(
            o.diagnostics,
            [
                "line 1: forbidden command \\vspace",
                "line 3: figure placement [H] is not allowed",
                "line 5: table placement [tx] uses unknown specifier 'x'",
            ]
        );
    }

    #[test]
    fn version_gate() {
        let params = serde_json::json!({"min_version": "0.3.0"});
        let mut ctx = JobContext::default();
        assert!(VersionCheck.run(&TexProject::default(), &params, &ctx).passed);
        ctx.vars.insert("toolkit_version".into(), "0.2.9".into());
        assert!(!VersionCheck.run(&TexProject::default(), &params, &ctx).passed);
        assert!(VersionCheck.validate(&serde_json::json!({"min_version": "x"})).is_err());
    }

    #[test]
    fn engine_hook_failure_reported() {
        let params = serde_json::json!({"engine": ["false"]});
        let o = BuildCheck.run(&doc("ok\n"), &params, &JobContext::default());
        assert!(!o.passed);
        let o = BuildCheck.run(&doc("ok\n"), &serde_json::json!({"engine": ["true"]}), &JobContext::default());
        assert!(o.passed, "{:?}", o.diagnostics);
    }
}
