//! LaTeX submission flattening: inline inputs, strip comments, rename
//! figures, collect support files, and write deterministic archives.

mod archive;
mod comments;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use archive::{read_sidecar, sidecar_path, write_tarball, Sidecar};
pub use comments::{comment_start, strip_comments, strip_comments_with, DEFAULT_VERBATIM_ENVS};

#[derive(Debug, Error)]
pub enum FlattenError {
    #[error("{includer} includes {target:?}, which does not exist")]
    MissingInclude { includer: String, target: String },
    #[error("inclusion cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("graphics reference {0:?} does not resolve to an asset")]
    UnresolvedGraphic(String),
    #[error("graphics reference {0:?} points into auxiliary material")]
    AuxiliaryGraphic(String),
    #[error("root file {0:?} is not part of the project")]
    MissingRoot(String),
    #[error("support files {0:?} and {1:?} share a file name")]
    NameClash(String, String),
    #[error("unknown profile {0:?} (expected arxiv_tl2020 or journal_tl2017)")]
    UnknownProfile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("project manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FlattenError + '_ {
    move |source| FlattenError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Archive layout target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    ArxivTl2020,
    /// Adds a slot for the precompiled bibliography.
    JournalTl2017,
}

impl FromStr for Profile {
    type Err = FlattenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arxiv_tl2020" | "arxiv" => Ok(Profile::ArxivTl2020),
            "journal_tl2017" | "journal" => Ok(Profile::JournalTl2017),
            other => Err(FlattenError::UnknownProfile(other.to_string())),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::ArxivTl2020 => "arxiv_tl2020",
            Profile::JournalTl2017 => "journal_tl2017",
        })
    }
}

/// A LaTeX project held in memory. Paths use `/` and are relative to the
/// project root.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TexProject {
    pub root_file: String,
    pub files: BTreeMap<String, String>,
    pub assets: BTreeMap<String, Vec<u8>>,
    /// Path prefixes holding auxiliary material that is never submitted.
    pub auxiliary: Vec<String>,
}

/// Extensions copied to the top level of the submission.
pub const SUPPORT_EXTENSIONS: [&str; 5] = ["bib", "sty", "cls", "bst", "bbl"];

/// Extensions tried for graphics references given without one.
pub const GRAPHIC_EXTENSIONS: [&str; 5] = ["pdf", "png", "jpg", "jpeg", "eps"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectManifest {
    root_file: String,
    #[serde(default)]
    files: Vec<String>,
    #[serde(default)]
    assets: Vec<String>,
    #[serde(default)]
    auxiliary: Vec<String>,
}

fn rel_path(base: &Path, p: &Path) -> String {
    p.strip_prefix(base)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

fn extension(path: &str) -> Option<&str> {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.rsplit_once('.').map(|(_, e)| e)
}

fn basename(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

impl TexProject {
    pub fn new(root_file: &str) -> Self {
        TexProject {
            root_file: root_file.to_string(),
            ..Default::default()
        }
    }

    pub fn with_file(mut self, path: &str, text: &str) -> Self {
        self.files.insert(path.to_string(), text.to_string());
        self
    }

    pub fn with_asset(mut self, path: &str, bytes: &[u8]) -> Self {
        self.assets.insert(path.to_string(), bytes.to_vec());
        self
    }

    pub fn with_auxiliary(mut self, prefix: &str) -> Self {
        self.auxiliary.push(prefix.to_string());
        self
    }

    /// Load every non-hidden file under `dir`: `.tex` files as text, the
    /// rest as assets.
    pub fn from_dir(dir: &Path, root_file: &str) -> Result<Self, FlattenError> {
        let mut project = TexProject::new(root_file);
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).map_err(io_err(&d))? {
                let entry = entry.map_err(io_err(&d))?;
                let path = entry.path();
                if entry.file_name().to_string_lossy().starts_with('.') {
                    continue;
                }
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                project.add_path(dir, &path)?;
            }
        }
        if !project.files.contains_key(root_file) {
            return Err(FlattenError::MissingRoot(root_file.to_string()));
        }
        Ok(project)
    }

    /// Load a project described by a JSON manifest listing paths relative to
    /// the manifest's directory.
    pub fn from_manifest(path: &Path) -> Result<Self, FlattenError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let m: ProjectManifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut project = TexProject::new(&m.root_file);
        project.auxiliary = m.auxiliary;
        for p in m.files.iter().chain(&m.assets) {
            project.add_path(base, &base.join(p))?;
        }
        if !project.files.contains_key(&m.root_file) {
            return Err(FlattenError::MissingRoot(m.root_file));
        }
        Ok(project)
    }

    fn add_path(&mut self, base: &Path, path: &Path) -> Result<(), FlattenError> {
        let rel = rel_path(base, path);
        let bytes = fs::read(path).map_err(io_err(path))?;
        if extension(&rel) == Some("tex") {
            self.files.insert(rel, String::from_utf8_lossy(&bytes).into_owned());
        } else {
            self.assets.insert(rel, bytes);
        }
        Ok(())
    }

    fn is_auxiliary(&self, path: &str) -> bool {
        self.auxiliary.iter().any(|p| path.starts_with(p.as_str()))
    }

    /// Write all files and assets below `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), FlattenError> {
        let all = self
            .files
            .iter()
            .map(|(p, t)| (p, t.as_bytes()))
            .chain(self.assets.iter().map(|(p, b)| (p, b.as_slice())));
        for (rel, bytes) in all {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

fn include_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\(?:input|include)\s*\{([^}]*)\}").expect("valid pattern"))
}

fn graphics_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(\\includegraphics\s*(?:\[[^\]]*\])?\s*\{)([^}]*)(\})").expect("valid pattern")
    })
}

fn clean_path(p: &str) -> String {
    let p = p.trim();
    p.strip_prefix("./").unwrap_or(p).to_string()
}

/// Replace `\input`/`\include` recursively with the included file bodies.
pub fn inline_inputs(project: &TexProject) -> Result<String, FlattenError> {
    if !project.files.contains_key(&project.root_file) {
        return Err(FlattenError::MissingRoot(project.root_file.clone()));
    }
    let mut stack = Vec::new();
    expand(project, &project.root_file, &mut stack)
}

fn resolve_include<'a>(project: &'a TexProject, target: &str) -> Option<(&'a String, &'a String)> {
    let t = clean_path(target);
    project
        .files
        .get_key_value(&t)
        .or_else(|| project.files.get_key_value(&format!("{t}.tex")))
}

fn expand(project: &TexProject, file: &str, stack: &mut Vec<String>) -> Result<String, FlattenError> {
    if let Some(pos) = stack.iter().position(|f| f == file) {
        let mut cycle = stack[pos..].to_vec();
        cycle.push(file.to_string());
        return Err(FlattenError::Cycle(cycle));
    }
    stack.push(file.to_string());
    let text = &project.files[file];
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let limit = comment_start(line).unwrap_or(line.len());
        let code = &line[..limit];
        let mut last = 0;
        for caps in include_re().captures_iter(code) {
            let whole = caps.get(0).expect("group 0");
            let target = &caps[1];
            let (name, _) = resolve_include(project, target).ok_or_else(|| FlattenError::MissingInclude {
                includer: file.to_string(),
                target: target.to_string(),
            })?;
            out.push_str(&code[last..whole.start()]);
            let body = expand(project, name, stack)?;
            out.push_str(body.strip_suffix('\n').unwrap_or(&body));
            last = whole.end();
        }
        out.push_str(&line[last..]);
    }
    stack.pop();
    Ok(out)
}

/// A figure's original path and its submission name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenamedAsset {
    pub original: String,
    pub new_name: String,
}

fn resolve_graphic<'a>(assets: &'a BTreeMap<String, Vec<u8>>, reference: &str) -> Option<&'a str> {
    let r = clean_path(reference);
    if let Some((k, _)) = assets.get_key_value(&r) {
        return Some(k);
    }
    GRAPHIC_EXTENSIONS
        .iter()
        .find_map(|e| assets.get_key_value(&format!("{r}.{e}")).map(|(k, _)| k.as_str()))
}

/// Rename referenced figures to `Fig1`, `Fig2`, ... in order of first
/// reference, keeping extensions, and rewrite the references.
pub fn rename_figures(
    tex: &str,
    assets: &BTreeMap<String, Vec<u8>>,
) -> Result<(String, Vec<RenamedAsset>), FlattenError> {
    let mut renames: Vec<RenamedAsset> = Vec::new();
    let mut error = None;
    let out = graphics_re().replace_all(tex, |caps: &regex::Captures<'_>| {
        let reference = &caps[2];
        let Some(original) = resolve_graphic(assets, reference) else {
            error.get_or_insert_with(|| FlattenError::UnresolvedGraphic(reference.to_string()));
            return caps[0].to_string();
        };
        let new_name = match renames.iter().find(|r| r.original == original) {
            Some(r) => r.new_name.clone(),
            None => {
                let n = renames.len() + 1;
                let new_name = match extension(original) {
                    Some(ext) => format!("Fig{n}.{ext}"),
                    None => format!("Fig{n}"),
                };
                renames.push(RenamedAsset {
                    original: original.to_string(),
                    new_name: new_name.clone(),
                });
                new_name
            }
        };
        format!("{}{}{}", &caps[1], new_name, &caps[3])
    });
    match error {
        Some(e) => Err(e),
        None => Ok((out.into_owned(), renames)),
    }
}

/// Role of an archive entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Source,
    Figure,
    Support,
    /// Precompiled bibliography expected by the journal profile but not yet
    /// produced.
    BblSlot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: EntryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenResult {
    pub flat_source: String,
    pub renamed_assets: Vec<RenamedAsset>,
    pub profile: Profile,
    pub manifest: Vec<ManifestEntry>,
    /// Archive contents keyed by manifest path.
    #[serde(skip)]
    pub contents: BTreeMap<String, Vec<u8>>,
}

impl FlattenResult {
    /// The result as a project, for re-flattening.
    pub fn as_project(&self) -> TexProject {
        let root = self
            .manifest
            .iter()
            .find(|e| e.kind == EntryKind::Source)
            .map_or("main.tex".to_string(), |e| e.path.clone());
        let mut p = TexProject::new(&root).with_file(&root, &self.flat_source);
        for (path, bytes) in &self.contents {
            if *path != root {
                p = p.with_asset(path, bytes);
            }
        }
        p
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn brace_arg_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([^{}]*)\}").expect("valid pattern"))
}

/// Point `{dir/name}` style references at the flattened top-level copies.
fn rewrite_support_refs(tex: &str, moved: &[(String, String)]) -> String {
    if moved.is_empty() {
        return tex.to_string();
    }
    brace_arg_re()
        .replace_all(tex, |caps: &regex::Captures<'_>| {
            let items: Vec<String> = caps[1]
                .split(',')
                .map(|item| {
                    let t = clean_path(item);
                    for (from, to) in moved {
                        let to_stem = to.rsplit_once('.').map_or(to.as_str(), |(s, _)| s);
                        let from_stem = from.rsplit_once('.').map_or(from.as_str(), |(s, _)| s);
                        if t == *from {
                            return item.replace(t.as_str(), to);
                        }
                        if t == from_stem {
                            return item.replace(t.as_str(), to_stem);
                        }
                    }
                    item.to_string()
                })
                .collect();
            format!("{{{}}}", items.join(","))
        })
        .into_owned()
}

/// Steps 1-4: inline, strip comments, rename figures, flatten support files.
pub fn build_submission(project: &TexProject, profile: Profile) -> Result<FlattenResult, FlattenError> {
    let inlined = inline_inputs(project)?;
    let stripped = strip_comments(&inlined);
    let (renamed_tex, renames) = rename_figures(&stripped, &project.assets)?;
    if let Some(r) = renames.iter().find(|r| project.is_auxiliary(&r.original)) {
        return Err(FlattenError::AuxiliaryGraphic(r.original.clone()));
    }

    let figure_sources: HashSet<&str> = renames.iter().map(|r| r.original.as_str()).collect();
    let mut support: BTreeMap<String, (String, &Vec<u8>)> = BTreeMap::new();
    for (path, bytes) in &project.assets {
        if project.is_auxiliary(path) || figure_sources.contains(path.as_str()) {
            continue;
        }
        if !extension(path).is_some_and(|e| SUPPORT_EXTENSIONS.contains(&e)) {
            continue;
        }
        let name = basename(path).to_string();
        if let Some((other, _)) = support.get(&name) {
            return Err(FlattenError::NameClash(other.clone(), path.clone()));
        }
        support.insert(name, (path.clone(), bytes));
    }
    let moved: Vec<(String, String)> = support
        .iter()
        .filter(|(name, (orig, _))| *name != orig)
        .map(|(name, (orig, _))| (orig.clone(), name.clone()))
        .collect();
    let flat_source = rewrite_support_refs(&renamed_tex, &moved);

    let root_name = basename(&project.root_file).to_string();
    let mut manifest = Vec::new();
    let mut contents = BTreeMap::new();
    let mut push = |path: &str, kind: EntryKind, source: Option<&str>, bytes: &[u8]| {
        manifest.push(ManifestEntry {
            path: path.to_string(),
            kind,
            source: source.filter(|s| *s != path).map(str::to_string),
            size: bytes.len() as u64,
            sha256: Some(sha256_hex(bytes)),
        });
        contents.insert(path.to_string(), bytes.to_vec());
    };
    push(&root_name, EntryKind::Source, Some(&project.root_file), flat_source.as_bytes());
    for r in &renames {
        push(&r.new_name, EntryKind::Figure, Some(&r.original), &project.assets[&r.original]);
    }
    for (name, (orig, bytes)) in &support {
        push(name, EntryKind::Support, Some(orig), bytes);
    }
    if profile == Profile::JournalTl2017 {
        let stem = root_name.strip_suffix(".tex").unwrap_or(&root_name);
        let bbl = format!("{stem}.bbl");
        if !manifest.iter().any(|e| e.path == bbl) {
            manifest.push(ManifestEntry {
                path: bbl,
                kind: EntryKind::BblSlot,
                source: None,
                size: 0,
                sha256: None,
            });
        }
    }

    Ok(FlattenResult {
        flat_source,
        renamed_assets: renames,
        profile,
        manifest,
        contents,
    })
}

/// Default archive name for a result written into `dir`.
pub fn archive_path(dir: &Path, stem: &str, profile: Profile) -> PathBuf {
    dir.join(format!("{stem}-{profile}.tar.gz"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project() -> TexProject {
        TexProject::new("main.tex")
            .with_file(
                "main.tex",
                "\\documentclass{article}\n\\usepackage{styles/style}\n% preamble note\n\\begin{document}\n\\input{sections/a}\n\\include{sections/b.tex}\n\\bibliography{bib/refs}\n\\end{document}\n",
            )
            .with_file("sections/a.tex", "A text % remark\n\\includegraphics[width=5cm]{plots/mass}\n")
            .with_file("sections/b.tex", "B text\n\\includegraphics{plots/pt.png}\n\\includegraphics{plots/mass.pdf}\n")
            .with_asset("plots/mass.pdf", b"%PDF-mass")
            .with_asset("plots/pt.png", b"png")
            .with_asset("plots/unused.png", b"x")
            .with_asset("bib/refs.bib", b"@article{x}")
            .with_asset("styles/style.sty", b"\\ProvidesPackage{style}")
            .with_asset("aux/extra.sty", b"")
            .with_auxiliary("aux/")
    }

    #[test]
    fn inline_two_files_in_order() {
        let out = inline_inputs(&project()).unwrap();
        let a = out.find("A text").unwrap();
        let b = out.find("B text").unwrap();
        assert!(a < b);
        assert!(!out.contains("\\input") && !out.contains("\\include{"));
    }

    #[test]
    fn inline_cycle_and_missing() {
        let p = TexProject::new("a.tex")
            .with_file("a.tex", "\\input{b}\n")
            .with_file("b.tex", "\\input{a}\n");
        match inline_inputs(&p) {
            Err(FlattenError::Cycle(c)) => assert_eq!(c, ["a.tex", "b.tex", "a.tex"]),
            other => panic!("{other:?}"),
        }
        let p = TexProject::new("a.tex").with_file("a.tex", "\\input{nope}\n");
        assert!(matches!(
            inline_inputs(&p),
            Err(FlattenError::MissingInclude { includer, target }) if includer == "a.tex" && target == "nope"
        ));
    }

    #[test]
    fn commented_input_ignored() {
        let p = TexProject::new("a.tex").with_file("a.tex", "x % \\input{missing}\n");
        assert_eq!(inline_inputs(&p).unwrap(), "x % \\input{missing}\n");
    }

    #[test]
    fn figures_first_reference_order() {
        let assets: BTreeMap<String, Vec<u8>> = [("plots/mass.pdf", b"" as &[u8]), ("plots/pt.png", b"")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_vec()))
            .collect();
        let tex = "\\includegraphics{plots/mass.pdf} \\includegraphics{plots/pt.png} \\includegraphics{plots/mass}";
        let (out, map) = rename_figures(tex, &assets).unwrap();
        assert_eq!(
            map.iter().map(|r| r.new_name.as_str()).collect::<Vec<_>>(),
            ["Fig1.pdf", "Fig2.png"]
        );
        assert_eq!(out, "\\includegraphics{Fig1.pdf} \\includegraphics{Fig2.png} \\includegraphics{Fig1.pdf}");
        let (same, none) = rename_figures("plain", &assets).unwrap();
        assert_eq!((same.as_str(), none.len()), ("plain", 0));
        assert!(matches!(
            rename_figures("\\includegraphics{nope}", &assets),
            Err(FlattenError::UnresolvedGraphic(r)) if r == "nope"
        ));
    }

    #[test]
    fn submission_manifest() {
        let r = build_submission(&project(), Profile::ArxivTl2020).unwrap();
        let paths: Vec<&str> = r.manifest.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["main.tex", "Fig1.pdf", "Fig2.png", "refs.bib", "style.sty"]);
        assert!(r.flat_source.contains("\\bibliography{refs}"));
        assert!(r.flat_source.contains("\\usepackage{style}"));
        assert!(!r.flat_source.contains("preamble note"));
        assert!(!r.flat_source.contains("remark"));
        let j = build_submission(&project(), Profile::JournalTl2017).unwrap();
        assert_eq!(j.manifest.last().unwrap().path, "main.bbl");
        assert_eq!(j.manifest.last().unwrap().kind, EntryKind::BblSlot);
    }

    #[test]
    fn idempotent_and_deterministic() {
        let r1 = build_submission(&project(), Profile::ArxivTl2020).unwrap();
        let r2 = build_submission(&project(), Profile::ArxivTl2020).unwrap();
        assert_eq!(r1, r2);
        let again = build_submission(&r1.as_project(), Profile::ArxivTl2020).unwrap();
        assert_eq!(again.flat_source, r1.flat_source);
        assert_eq!(again.manifest, r1.manifest.iter().map(|e| ManifestEntry { source: None, ..e.clone() }).collect::<Vec<_>>());
    }

    #[test]
    fn auxiliary_graphic_rejected() {
        let p = TexProject::new("m.tex")
            .with_file("m.tex", "\\includegraphics{aux/x.pdf}")
            .with_asset("aux/x.pdf", b"")
            .with_auxiliary("aux/");
        assert!(matches!(
            build_submission(&p, Profile::ArxivTl2020),
            Err(FlattenError::AuxiliaryGraphic(_))
        ));
    }
}
