//! Staged check pipelines: branch-based selection, stage gating and the
//! editing and submission job suites.

mod jobs;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flatten::TexProject;

pub use jobs::{StyleRules, TOOLKIT_VERSION};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PipelineError {
    #[error("pipeline config: {0}")]
    Json(String),
    #[error("pipeline {0:?} has no stages")]
    NoStages(String),
    #[error("duplicate stage name {0:?}")]
    DuplicateStage(String),
    #[error("stage {stage:?} job {job:?}: unregistered job kind {kind:?}")]
    UnknownKind { stage: String, job: String, kind: String },
    #[error("stage {stage:?} job {job:?}: {message}")]
    BadParams { stage: String, job: String, message: String },
}

/// Which suite a ref triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    Editing,
    Submission,
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineKind::Editing => "editing",
            PipelineKind::Submission => "submission",
        })
    }
}

/// Prefix of branches and tags that trigger submission processing.
pub const SUBMISSION_PREFIX: &str = "PO-";

/// Submission for refs starting with `PO-`, editing otherwise.
pub fn select_pipeline(ref_name: &str) -> PipelineKind {
    if ref_name.starts_with(SUBMISSION_PREFIX) {
        PipelineKind::Submission
    } else {
        PipelineKind::Editing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub name: String,
    pub jobs: Vec<JobSpec>,
    /// Run only when an earlier stage failed.
    #[serde(default)]
    pub run_on_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    pub stages: Vec<Stage>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Json(e.to_string()))
    }

    /// Check stage names and job kinds against `registry`.
    pub fn validate(&self, registry: &JobRegistry) -> Result<(), PipelineError> {
        if self.stages.is_empty() {
            return Err(PipelineError::NoStages(self.name.clone()));
        }
        let mut names = HashSet::new();
        for stage in &self.stages {
            if !names.insert(stage.name.as_str()) {
                return Err(PipelineError::DuplicateStage(stage.name.clone()));
            }
            for job in &stage.jobs {
                let imp = registry.get(&job.kind).ok_or_else(|| PipelineError::UnknownKind {
                    stage: stage.name.clone(),
                    job: job.name.clone(),
                    kind: job.kind.clone(),
                })?;
                imp.validate(&job.params).map_err(|message| PipelineError::BadParams {
                    stage: stage.name.clone(),
                    job: job.name.clone(),
                    message,
                })?;
            }
        }
        Ok(())
    }

    /// The bundled configuration for a suite.
    pub fn bundled(kind: PipelineKind) -> Self {
        let text = match kind {
            PipelineKind::Editing => crate::template::EDITING_PIPELINE,
            PipelineKind::Submission => crate::template::SUBMISSION_PIPELINE,
        };
        Self::from_json(text).expect("bundled pipeline parses")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Passed => "passed",
            Status::Failed => "failed",
            Status::Skipped => "skipped",
        })
    }
}

/// A file produced by a job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

/// What a job reports back.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JobOutcome {
    pub passed: bool,
    pub diagnostics: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl JobOutcome {
    pub fn from_diagnostics(diagnostics: Vec<String>) -> Self {
        JobOutcome {
            passed: diagnostics.is_empty(),
            diagnostics,
            artifacts: Vec::new(),
        }
    }
}

/// Inputs shared by all jobs of one run.
#[derive(Debug, Clone, Default)]
pub struct JobContext {
    pub vars: BTreeMap<String, String>,
    /// Names of stages that failed before the current one.
    pub failed_stages: Vec<String>,
}

impl JobContext {
    pub fn var(&self, key: &str) -> Option<&str> {
        self.vars.get(key).map(String::as_str)
    }
}

/// A registered job kind. Jobs report failures through [`JobOutcome`].
pub trait Job: Send + Sync {
    fn validate(&self, _params: &serde_json::Value) -> Result<(), String> {
        Ok(())
    }

    fn run(&self, project: &TexProject, params: &serde_json::Value, ctx: &JobContext) -> JobOutcome;
}

#[derive(Clone)]
pub struct JobRegistry {
    jobs: BTreeMap<String, Arc<dyn Job>>,
}

impl fmt::Debug for JobRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.jobs.keys()).finish()
    }
}

impl Default for JobRegistry {
    fn default() -> Self {
        let mut r = JobRegistry::empty();
        jobs::register_builtin(&mut r);
        r
    }
}

impl JobRegistry {
    pub fn empty() -> Self {
        JobRegistry { jobs: BTreeMap::new() }
    }

    pub fn register(&mut self, kind: &str, job: impl Job + 'static) -> &mut Self {
        self.jobs.insert(kind.to_string(), Arc::new(job));
        self
    }

    pub fn get(&self, kind: &str) -> Option<&Arc<dyn Job>> {
        self.jobs.get(kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.jobs.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobResult {
    pub name: String,
    pub kind: String,
    pub status: Status,
    pub diagnostics: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageResult {
    pub name: String,
    pub status: Status,
    pub jobs: Vec<JobResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub pipeline: String,
    pub status: Status,
    pub stages: Vec<StageResult>,
}

impl PipelineResult {
    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }

    pub fn stage(&self, name: &str) -> Option<&StageResult> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn artifacts(&self) -> impl Iterator<Item = &Artifact> {
        self.stages.iter().flat_map(|s| s.jobs.iter()).flat_map(|j| j.artifacts.iter())
    }

    /// One line per stage and job, then indented diagnostics.
    pub fn to_text(&self) -> String {
        let mut out = format!("pipeline {}: {}\n", self.pipeline, self.status);
        for stage in &self.stages {
            out.push_str(&format!("  stage {}: {}\n", stage.name, stage.status));
            for job in &stage.jobs {
                out.push_str(&format!("    job {} ({}): {}\n", job.name, job.kind, job.status));
                for d in &job.diagnostics {
                    out.push_str(&format!("      {d}\n"));
                }
            }
        }
        out
    }
}

/// Execute `config` stage by stage; jobs within a stage run concurrently and
/// are reported in configuration order.
pub fn run_pipeline(
    config: &PipelineConfig,
    project: &TexProject,
    vars: &BTreeMap<String, String>,
    registry: &JobRegistry,
) -> Result<PipelineResult, PipelineError> {
    config.validate(registry)?;
    let mut ctx = JobContext {
        vars: vars.clone(),
        failed_stages: Vec::new(),
    };
    let mut stages = Vec::new();
    for stage in &config.stages {
        let earlier_failed = !ctx.failed_stages.is_empty();
        if earlier_failed != stage.run_on_failure {
            stages.push(StageResult {
                name: stage.name.clone(),
                status: Status::Skipped,
                jobs: stage
                    .jobs
                    .iter()
                    .map(|j| JobResult {
                        name: j.name.clone(),
                        kind: j.kind.clone(),
                        status: Status::Skipped,
                        diagnostics: Vec::new(),
                        artifacts: Vec::new(),
                    })
                    .collect(),
            });
            continue;
        }
        let outcomes: Vec<JobOutcome> = std::thread::scope(|scope| {
            let handles: Vec<_> = stage
                .jobs
                .iter()
                .map(|spec| {
                    let job = Arc::clone(registry.get(&spec.kind).expect("validated kind"));
                    let ctx = &ctx;
                    scope.spawn(move || {
                        catch_unwind(AssertUnwindSafe(|| job.run(project, &spec.params, ctx))).unwrap_or_else(|_| {
                            JobOutcome {
                                passed: false,
                                diagnostics: vec!["job panicked".to_string()],
                                artifacts: Vec::new(),
                            }
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("panics are caught inside the job thread"))
                .collect()
        });
        let jobs: Vec<JobResult> = stage
            .jobs
            .iter()
            .zip(outcomes)
            .map(|(spec, o)| JobResult {
                name: spec.name.clone(),
                kind: spec.kind.clone(),
                status: if o.passed { Status::Passed } else { Status::Failed },
                diagnostics: o.diagnostics,
                artifacts: o.artifacts,
            })
            .collect();
        let status = if jobs.iter().any(|j| j.status == Status::Failed) {
            Status::Failed
        } else {
            Status::Passed
        };
        if status == Status::Failed {
            ctx.failed_stages.push(stage.name.clone());
        }
        stages.push(StageResult {
            name: stage.name.clone(),
            status,
            jobs,
        });
    }
    let status = if stages.iter().any(|s| s.status == Status::Failed) {
        Status::Failed
    } else {
        Status::Passed
    };
    Ok(PipelineResult {
        pipeline: config.name.clone(),
        status,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(bool);

    impl Job for Fixed {
        fn run(&self, _: &TexProject, _: &serde_json::Value, _: &JobContext) -> JobOutcome {
            JobOutcome {
                passed: self.0,
                diagnostics: if self.0 { vec![] } else { vec!["forced failure".into()] },
                artifacts: vec![],
            }
        }
    }

    fn registry() -> JobRegistry {
        let mut r = JobRegistry::empty();
        r.register("ok", Fixed(true)).register("bad", Fixed(false));
        r
    }

    fn config(kinds: &[(&str, bool)]) -> PipelineConfig {
        PipelineConfig {
            name: "t".into(),
            stages: kinds
                .iter()
                .enumerate()
                .map(|(i, (k, on_failure))| Stage {
                    name: format!("s{}", i + 1),
                    jobs: vec![JobSpec {
                        name: format!("j{}", i + 1),
                        kind: k.to_string(),
                        params: serde_json::Value::Null,
                    }],
                    run_on_failure: *on_failure,
                })
                .collect(),
        }
    }

    #[test]
    fn selection_table() {
        for (r, k) in [
            ("PO-ready", PipelineKind::Submission),
            ("PO-v1", PipelineKind::Submission),
            ("master", PipelineKind::Editing),
            ("feature/x", PipelineKind::Editing),
            ("po-ready", PipelineKind::Editing),
        ] {
            assert_eq!(select_pipeline(r), k, "{r}");
        }
    }

    #[test]
    fn failure_skips_later_stages() {
        let c = config(&[("ok", false), ("ok", false), ("bad", false), ("ok", false), ("ok", true)]);
        let r = run_pipeline(&c, &TexProject::default(), &BTreeMap::new(), &registry()).unwrap();
        let statuses: Vec<Status> = r.stages.iter().map(|s| s.status).collect();
        assert_eq!(
            statuses,
            [Status::Passed, Status::Passed, Status::Failed, Status::Skipped, Status::Passed]
        );
        assert_eq!(r.status, Status::Failed);
    }

    #[test]
    fn on_failure_stage_skipped_when_clean() {
        let c = config(&[("ok", false), ("ok", true)]);
        let r = run_pipeline(&c, &TexProject::default(), &BTreeMap::new(), &registry()).unwrap();
        assert_eq!(r.stages[1].status, Status::Skipped);
        assert!(r.passed());
    }

    #[test]
    fn unknown_kind_rejected_before_running() {
        let c = config(&[("ok", false), ("nope", false)]);
        assert!(matches!(
            run_pipeline(&c, &TexProject::default(), &BTreeMap::new(), &registry()),
            Err(PipelineError::UnknownKind { kind, .. }) if kind == "nope"
        ));
        let dup = PipelineConfig {
            name: "d".into(),
            stages: vec![config(&[("ok", false)]).stages[0].clone(); 2],
        };
        assert!(matches!(dup.validate(&registry()), Err(PipelineError::DuplicateStage(_))));
    }
}
