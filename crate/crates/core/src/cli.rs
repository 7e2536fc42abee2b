//! Command-line front end. Every subcommand is a thin adapter over the
//! library modules.
//!
//! Exit codes: 0 success, 1 findings or failed checks, 2 usage or
//! configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::Map;

use crate::authorlist::{
    load_agencies, parse_author_list, render_acknowledgements, render_author_list, snapshot_author_list, Format,
    MemberDb, HEADER_REF_CODE, HEADER_TITLE,
};
use crate::flatten::{archive_path, build_submission, write_tarball, Profile, TexProject};
use crate::matcher::{MatchThresholds, SynonymDb};
use crate::pipeline::{run_pipeline, select_pipeline, JobRegistry, PipelineConfig};
use crate::report::check::{inputs_path, run_check, CheckInputs, ProofFormat};
use crate::report::server::{serve, AppState};
use crate::report::write_report;
use crate::workflow::{load_instance, load_workflow, save_instance, update_instance, Engine, WorkflowDef};

/// Environment variable naming the configuration file.
pub const CONFIG_ENV: &str = "PUBFORGE_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pubforge", version, about = "Publication-submission toolkit")]
pub struct Cli {
    /// Configuration file (JSON); defaults to $PUBFORGE_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select and run the pipeline for a branch or tag.
    Check(CheckArgs),
    /// Flatten a LaTeX project into a submission tarball plus manifest.
    Flatten(FlattenArgs),
    /// Author list snapshot, rendering and acknowledgements.
    #[command(subcommand)]
    Authorlist(AuthorlistCommand),
    /// Compare a journal proof with the author list.
    Compare(CompareArgs),
    /// Drive a workflow instance.
    #[command(subcommand)]
    Workflow(WorkflowCommand),
    /// Serve reports and the synonym editor over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Project directory.
    #[arg(long, default_value = ".")]
    pub project: PathBuf,
    /// Root file relative to the project directory.
    #[arg(long, default_value = "main.tex")]
    pub root: String,
    /// Path prefixes holding auxiliary material.
    #[arg(long = "auxiliary")]
    pub auxiliary: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Branch or tag name; `PO-*` selects the submission pipeline.
    #[arg(long = "ref")]
    pub ref_name: String,
    #[command(flatten)]
    pub project: ProjectArgs,
    /// Pipeline configuration overriding the bundled one.
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
    /// Directory receiving tarballs from packaging jobs.
    #[arg(long)]
    pub artifacts: Option<PathBuf>,
    /// Write the machine-readable result here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlattenArgs {
    /// arxiv_tl2020 or journal_tl2017.
    #[arg(long)]
    pub profile: String,
    #[command(flatten)]
    pub project: ProjectArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Archive name stem; defaults to the root file stem.
    #[arg(long)]
    pub stem: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum AuthorlistCommand {
    /// Snapshot qualified members at a date and write the XML list.
    Snapshot {
        /// Member database JSON.
        #[arg(long)]
        db: PathBuf,
        /// Reference date (YYYY-MM-DD).
        #[arg(long)]
        date: NaiveDate,
        /// Reference code stored in the header.
        #[arg(long = "ref-code")]
        ref_code: String,
        /// Paper title stored in the header.
        #[arg(long)]
        title: Option<String>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an XML author list as xml or tex.
    Render {
        /// Author list XML.
        #[arg(long)]
        xml: PathBuf,
        /// xml or tex.
        #[arg(long, default_value = "tex")]
        format: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the acknowledgements block for a date.
    Ack {
        /// Funding agencies JSON; falls back to the configuration file.
        #[arg(long)]
        agencies: Option<PathBuf>,
        /// Reference date (YYYY-MM-DD).
        #[arg(long)]
        date: NaiveDate,
        /// Template containing {{agencies}}.
        #[arg(long)]
        template: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Author list XML sent to the journal.
    #[arg(long)]
    pub xml: PathBuf,
    /// Proof as PDF or pretokenized text.
    #[arg(long)]
    pub proof: PathBuf,
    /// Publisher profile name or path.
    #[arg(long)]
    pub publisher: String,
    /// auto, pdf or text.
    #[arg(long, default_value = "auto")]
    pub format: String,
    /// Synonym database JSON.
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    /// Funding agencies JSON.
    #[arg(long)]
    pub agencies: Option<PathBuf>,
    /// Directory receiving the report.
    #[arg(long, default_value = ".")]
    pub reports: PathBuf,
    /// Document label stored in the report.
    #[arg(long, default_value = "")]
    pub document: String,
    /// Report date (YYYY-MM-DD); today when absent.
    #[arg(long)]
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub instance: PathBuf,
    /// Workflow definition; the bundled Phase 0 workflow when absent.
    #[arg(long)]
    pub def: Option<PathBuf>,
    /// Workspace for outbox, effect log and repositories; defaults to the
    /// instance's directory.
    #[arg(long)]
    pub workspace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Actor role; repeatable.
    #[arg(long = "role", required = true)]
    pub roles: Vec<String>,
    /// Field assignment `key=value`; lists are comma separated.
    #[arg(long = "set")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum WorkflowCommand {
    /// Create an instance at the start step.
    Init(InstanceArgs),
    /// Store field values and stay on the step.
    Save(StepArgs),
    /// Store field values and move on.
    Proceed(StepArgs),
    /// Print the instance.
    Show(InstanceArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory holding report JSON files.
    #[arg(long)]
    pub reports: PathBuf,
    /// Synonym database JSON edited through the API.
    #[arg(long)]
    pub synonyms: Option<PathBuf>,
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory with the UI build.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

/// Optional configuration file. Relative paths are resolved against the
/// file's directory.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub synonyms: Option<PathBuf>,
    /// Publisher name to profile file.
    #[serde(default)]
    pub profiles: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub thresholds: Option<MatchThresholds>,
    /// `editing` / `submission` to pipeline configuration file.
    #[serde(default)]
    pub pipelines: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub workspace: Option<PathBuf>,
    #[serde(default)]
    pub agencies: Option<PathBuf>,
    #[serde(default)]
    pub workflow: Option<PathBuf>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: CliConfig =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.synonyms.as_mut().map(anchor);
        cfg.workspace.as_mut().map(anchor);
        cfg.agencies.as_mut().map(anchor);
        cfg.workflow.as_mut().map(anchor);
        cfg.profiles.values_mut().for_each(anchor);
        cfg.pipelines.values_mut().for_each(anchor);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let files = self
            .synonyms
            .iter()
            .map(|p| ("synonyms", p))
            .chain(self.agencies.iter().map(|p| ("agencies", p)))
            .chain(self.workflow.iter().map(|p| ("workflow", p)))
            .chain(self.profiles.values().map(|p| ("profiles", p)))
            .chain(self.pipelines.values().map(|p| ("pipelines", p)));
        for (key, path) in files {
            if !path.is_file() {
                return Err(CliError::config(format!("config {key}: {} does not exist", path.display())));
            }
        }
        for k in self.pipelines.keys() {
            if k != "editing" && k != "submission" {
                return Err(CliError::config(format!("config pipelines: unknown pipeline {k:?}")));
            }
        }
        Ok(())
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::config(e.to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| usage(format!("{}: {e}", parent.display())))?;
    }
    crate::fsutil::write_atomic(path, text.as_bytes()).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_project(args: &ProjectArgs) -> Result<TexProject, CliError> {
    let mut p = TexProject::from_dir(&args.project, &args.root).map_err(usage)?;
    p.auxiliary.extend(args.auxiliary.iter().cloned());
    if p.auxiliary.is_empty() {
        p.auxiliary.push(crate::template::AUXILIARY_PREFIX.to_string());
    }
    Ok(p)
}

/// Parse `argv` (including the program name) and run; output goes to
/// `out`/`err`. Returns the exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let config = match cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
    {
        Some(path) => match CliConfig::load(&path) {
            Ok(c) => c,
            Err(e) => {
                let _ = writeln!(err, "error: {}", e.message);
                return e.code;
            }
        },
        None => CliConfig::default(),
    };
    match dispatch(cli.command, &config, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Run with the process arguments on stdout/stderr.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

fn dispatch(command: Command, cfg: &CliConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Check(a) => check(a, cfg, out),
        Command::Flatten(a) => flatten(a, out),
        Command::Authorlist(a) => authorlist(a, cfg, out),
        Command::Compare(a) => compare(a, cfg, out),
        Command::Workflow(a) => workflow(a, cfg, out, err),
        Command::Serve(a) => serve_cmd(a, cfg, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(usage)
}

fn check(a: CheckArgs, cfg: &CliConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    if a.ref_name.is_empty() {
        return Err(usage("--ref must not be empty"));
    }
    let kind = select_pipeline(&a.ref_name);
    let config = match a.pipeline.as_ref().or_else(|| cfg.pipelines.get(&kind.to_string())) {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            PipelineConfig::from_json(&text).map_err(usage)?
        }
        None => PipelineConfig::bundled(kind),
    };
    let project = load_project(&a.project)?;
    let mut vars = BTreeMap::new();
    vars.insert("ref".to_string(), a.ref_name.clone());
    if let Some(dir) = &a.artifacts {
        vars.insert("artifacts_dir".to_string(), dir.display().to_string());
    }
    let result = run_pipeline(&config, &project, &vars, &JobRegistry::default()).map_err(usage)?;
    emit(out, &format!("ref {} selects the {kind} pipeline\n", a.ref_name))?;
    emit(out, &result.to_text())?;
    if let Some(path) = &a.json {
        let mut json = serde_json::to_string_pretty(&result).map_err(usage)?;
        json.push('\n');
        write_file(path, &json)?;
    }
    Ok(if result.passed() { EXIT_OK } else { EXIT_FINDINGS })
}

fn flatten(a: FlattenArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let profile: Profile = a.profile.parse().map_err(usage)?;
    let project = load_project(&a.project)?;
    let result = match build_submission(&project, profile) {
        Ok(r) => r,
        Err(e) => {
            emit(out, &format!("flatten failed: {e}\n"))?;
            return Ok(EXIT_FINDINGS);
        }
    };
    let root_stem = a.project.root.rsplit('/').next().unwrap_or("main").trim_end_matches(".tex");
    let stem = a.stem.as_deref().unwrap_or(root_stem);
    let archive = archive_path(&a.out, stem, profile);
    let sidecar = write_tarball(&result, &archive).map_err(usage)?;
    emit(out, &format!("{}\n", archive.display()))?;
    emit(out, &format!("{}\n", crate::flatten::sidecar_path(&archive).display()))?;
    for e in &sidecar.entries {
        emit(out, &format!("  {} ({:?})\n", e.path, e.kind))?;
    }
    Ok(EXIT_OK)
}

fn authorlist(a: AuthorlistCommand, cfg: &CliConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    match a {
        AuthorlistCommand::Snapshot {
            db,
            date,
            ref_code,
            title,
            out: path,
        } => {
            let db = MemberDb::load(&db).map_err(usage)?;
            let mut header = BTreeMap::new();
            header.insert(HEADER_REF_CODE.to_string(), ref_code);
            if let Some(t) = title {
                header.insert(HEADER_TITLE.to_string(), t);
            }
            let list = snapshot_author_list(&db, date, &header).map_err(usage)?;
            let xml = render_author_list(&list, Format::Xml).map_err(usage)?;
            match path {
                Some(p) => write_file(&p, &xml)?,
                None => emit(out, &xml)?,
            }
        }
        AuthorlistCommand::Render { xml, format, out: path } => {
            let format: Format = format.parse().map_err(usage)?;
            let text = fs::read_to_string(&xml).map_err(|e| usage(format!("{}: {e}", xml.display())))?;
            let parsed = parse_author_list(&text).map_err(usage)?;
            let rendered = render_author_list(&parsed.list, format).map_err(usage)?;
            match path {
                Some(p) => write_file(&p, &rendered)?,
                None => emit(out, &rendered)?,
            }
        }
        AuthorlistCommand::Ack {
            agencies,
            date,
            template,
        } => {
            let path = agencies
                .or_else(|| cfg.agencies.clone())
                .ok_or_else(|| usage("--agencies is required (or set agencies in the config)"))?;
            let agencies = load_agencies(&path).map_err(usage)?;
            let tpl = fs::read_to_string(&template).map_err(|e| usage(format!("{}: {e}", template.display())))?;
            let ack = render_acknowledgements(&agencies, date, &tpl).map_err(usage)?;
            emit(out, &ack.text)?;
            if !ack.text.ends_with('\n') {
                emit(out, "\n")?;
            }
            if !ack.warnings.is_empty() {
                return Ok(EXIT_FINDINGS);
            }
        }
    }
    Ok(EXIT_OK)
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn compare(a: CompareArgs, cfg: &CliConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let format: ProofFormat = a.format.parse().map_err(usage)?;
    let publisher = match cfg.profiles.get(&a.publisher) {
        Some(p) => absolute(p).display().to_string(),
        None if Path::new(&a.publisher).is_file() => absolute(Path::new(&a.publisher)).display().to_string(),
        None => a.publisher.clone(),
    };
    let synonyms_path = a.synonyms.clone().or_else(|| cfg.synonyms.clone());
    let synonyms = match &synonyms_path {
        Some(p) => SynonymDb::load(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => SynonymDb::default(),
    };
    let inputs = CheckInputs {
        author_list: absolute(&a.xml),
        proof: absolute(&a.proof),
        proof_format: format,
        publisher,
        agencies: a.agencies.clone().or_else(|| cfg.agencies.clone()).map(|p| absolute(&p)),
        thresholds: cfg.thresholds.unwrap_or_default(),
        document: a.document.clone(),
        creation_date: a.date,
    };
    let report = run_check(&inputs, &synonyms).map_err(usage)?;
    let path = report.path_in(&a.reports);
    write_file(&path, &write_report(&report))?;
    write_file(&inputs_path(&path), &inputs.to_json())?;
    emit(out, &format!("report {}\n", path.display()))?;
    for (key, n) in report.counts() {
        emit(out, &format!("{key}: {n}\n"))?;
    }
    Ok(if report.findings() > 0 { EXIT_FINDINGS } else { EXIT_OK })
}

fn engine_for(args: &InstanceArgs, cfg: &CliConfig) -> Result<Engine, CliError> {
    let def = match args.def.as_ref().or(cfg.workflow.as_ref()) {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            load_workflow(&text).map_err(usage)?
        }
        None => WorkflowDef::phase0(),
    };
    let workspace = args
        .workspace
        .clone()
        .or_else(|| cfg.workspace.clone())
        .unwrap_or_else(|| {
            args.instance
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
        });
    Ok(Engine::new(def, workspace))
}

fn workflow(a: WorkflowCommand, cfg: &CliConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match a {
        WorkflowCommand::Init(args) => {
            let engine = engine_for(&args, cfg)?;
            if args.instance.exists() {
                return Err(usage(format!("{} already exists", args.instance.display())));
            }
            let inst = engine.start();
            if let Some(parent) = args.instance.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(usage)?;
            }
            save_instance(&args.instance, &inst).map_err(usage)?;
            emit(out, &format!("{} at step {}\n", inst.def_ref, inst.current_node))?;
            Ok(EXIT_OK)
        }
        WorkflowCommand::Save(step) => step_command(step, cfg, out, err, false),
        WorkflowCommand::Proceed(step) => step_command(step, cfg, out, err, true),
        WorkflowCommand::Show(args) => {
            let inst = load_instance(&args.instance).map_err(usage)?;
            let mut json = serde_json::to_string_pretty(&inst).map_err(usage)?;
            json.push('\n');
            emit(out, &json)?;
            Ok(EXIT_OK)
        }
    }
}

fn step_command(
    step: StepArgs,
    cfg: &CliConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
    proceed: bool,
) -> Result<i32, CliError> {
    let engine = engine_for(&step.instance, cfg)?;
    let result = update_instance(&step.instance.instance, |inst| {
        let data: Map<String, serde_json::Value> = engine.parse_assignments(inst, &step.set)?;
        if proceed {
            let p = engine.proceed(inst, &step.roles, data)?;
            let report = (p.instance.current_node.clone(), p.effects, p.outbox_files);
            Ok((p.instance, Some(report)))
        } else {
            Ok((engine.save(inst, &step.roles, data)?, None))
        }
    });
    match result {
        Ok(Some((node, effects, files))) => {
            emit(out, &format!("proceeded to {node}\n"))?;
            for e in effects {
                emit(out, &format!("effect {} {}\n", e.action, e.target))?;
            }
            for f in files {
                emit(out, &format!("notification {}\n", f.display()))?;
            }
            Ok(EXIT_OK)
        }
        Ok(None) => {
            emit(out, "saved\n")?;
            Ok(EXIT_OK)
        }
        Err(e) => {
            emit(err, &format!("rejected: {e}\n"))?;
            Ok(EXIT_FINDINGS)
        }
    }
}

fn serve_cmd(a: ServeArgs, cfg: &CliConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let synonyms = a
        .synonyms
        .clone()
        .or_else(|| cfg.synonyms.clone())
        .ok_or_else(|| usage("--synonyms is required (or set synonyms in the config)"))?;
    if !a.reports.is_dir() {
        return Err(usage(format!("{} is not a directory", a.reports.display())));
    }
    let mut state = AppState::new(&a.reports, synonyms);
    if let Some(dir) = &a.static_dir {
        state = state.with_static_dir(dir);
    }
    emit(out, &format!("listening on http://{}\n", a.addr))?;
    let _ = out.flush();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(usage)?;
    runtime.block_on(serve(a.addr, state)).map_err(usage)?;
    Ok(EXIT_OK)
}

