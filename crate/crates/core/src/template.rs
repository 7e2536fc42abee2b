//! Bundled publication template and configuration files.

use std::path::Path;

use crate::flatten::{FlattenError, TexProject};

/// Placeholder replaced by the reference code in file names and contents.
pub const REFCODE_PLACEHOLDER: &str = "REFCODE";

/// Root file of the template.
pub const ROOT_FILE: &str = "main.tex";

/// Auxiliary-material prefix of the template.
pub const AUXILIARY_PREFIX: &str = "aux/";

macro_rules! asset {
    ($path:literal) => {
        ($path, include_bytes!(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/template/", $path)) as &[u8])
    };
}

const FILES: [(&str, &[u8]); 9] = [
    asset!("main.tex"),
    asset!("REFCODE-metadata.tex"),
    asset!("sections/introduction.tex"),
    asset!("sections/results.tex"),
    asset!("figures/mass.pdf"),
    asset!("bib/refs.bib"),
    asset!("latex/style.sty"),
    asset!("aux/auxmaterial.tex"),
    asset!("aux/extra_plot.pdf"),
];

pub const EDITING_PIPELINE: &str = include_str!("../assets/pipelines/editing.json");
pub const SUBMISSION_PIPELINE: &str = include_str!("../assets/pipelines/submission.json");
pub const STYLE_RULES: &str = include_str!("../assets/rules/style_rules.json");
pub const PHASE0_WORKFLOW: &str = include_str!("../assets/workflows/phase0.json");
pub const APS_PROFILE: &str = include_str!("../assets/profiles/aps.json");
pub const ELSEVIER_PROFILE: &str = include_str!("../assets/profiles/elsevier.json");

/// Bundled publisher profile by case-insensitive name.
pub fn bundled_profile(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "aps" => Some(APS_PROFILE),
        "elsevier" => Some(ELSEVIER_PROFILE),
        _ => None,
    }
}

fn build(code: Option<&str>) -> TexProject {
    let mut project = TexProject::new(ROOT_FILE).with_auxiliary(AUXILIARY_PREFIX);
    for (path, bytes) in FILES {
        let path = match code {
            Some(c) => path.replace(REFCODE_PLACEHOLDER, c),
            None => path.to_string(),
        };
        if path.ends_with(".tex") {
            let text = String::from_utf8_lossy(bytes);
            let text = match code {
                Some(c) => text.replace(REFCODE_PLACEHOLDER, c),
                None => text.into_owned(),
            };
            project.files.insert(path, text);
        } else {
            project.assets.insert(path, bytes.to_vec());
        }
    }
    project
}

/// The template with its placeholders intact.
pub fn template_project() -> TexProject {
    build(None)
}

/// The template with `REFCODE` replaced by `code` in names and text.
pub fn instantiate(code: &str) -> TexProject {
    build(Some(code))
}

/// Write an instantiated template below `dir`.
pub fn write_instance(dir: &Path, code: &str) -> Result<TexProject, FlattenError> {
    let project = instantiate(code);
    project.write_to(dir)?;
    Ok(project)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_substitutes_code() {
        let p = instantiate("ANA-SUSY-2019-04-PAPER");
        assert!(p.files.contains_key("ANA-SUSY-2019-04-PAPER-metadata.tex"));
        assert!(p.files["main.tex"].contains("\\input{ANA-SUSY-2019-04-PAPER-metadata}"));
        assert!(!p.files.values().any(|t| t.contains(REFCODE_PLACEHOLDER)));
        assert!(template_project().files.contains_key("REFCODE-metadata.tex"));
    }
}
