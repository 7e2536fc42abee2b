//! Run the bundled check pipelines on a freshly instantiated paper template,
//! then break its reference code and run again.
//!
//! Run with `cargo run --example pipeline_run`.

use std::collections::BTreeMap;

use pubforge::pipeline::{run_pipeline, select_pipeline, JobRegistry, PipelineConfig};
use pubforge::template::instantiate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = JobRegistry::default();
    let vars = BTreeMap::new();
    let mut project = instantiate("ANA-SUSY-2019-04-PAPER");

    for branch in ["master", "PO-ready"] {
        let kind = select_pipeline(branch);
        let result = run_pipeline(&PipelineConfig::bundled(kind), &project, &vars, &registry)?;
        println!("branch {branch} runs the {kind} pipeline:\n{}", result.to_text());
        for a in result.artifacts() {
            println!("  artifact {} {}", a.name, a.path.as_deref().unwrap_or(""));
        }
    }

    if let Some(meta) = project.files.get_mut("ANA-SUSY-2019-04-PAPER-metadata.tex") {
        *meta = meta.replace("\\AtlasRefCode{ANA-SUSY-2019-04-PAPER}", "\\AtlasRefCode{bad code}");
    }
    let kind = select_pipeline("master");
    let result = run_pipeline(&PipelineConfig::bundled(kind), &project, &vars, &registry)?;
    println!("after breaking the reference code:\n{}", result.to_text());
    Ok(())
}
