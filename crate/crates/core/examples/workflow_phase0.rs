//! Drive the bundled phase-0 workflow from analysis submission to sign-off,
//! including one editorial rejection, then replay and audit the history.
//!
//! Run with `cargo run --example workflow_phase0`.

use std::path::Path;

use pubforge::workflow::{read_effects, read_outbox, Engine, WorkflowDef};
use serde_json::{json, Map, Value};

fn data(v: Value) -> Map<String, Value> {
    v.as_object().cloned().unwrap_or_default()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let workspace = tempfile::tempdir()?;
    let db = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/member_db.json");
    std::fs::copy(db, workspace.path().join("member_db.json"))?;
    let engine = Engine::new(WorkflowDef::phase0(), workspace.path());

    let mut inst = engine.start();
    inst = engine.save(&inst, &["convener".into()], data(json!({"ref_code": "ANA-SUSY-2019-04"})))?;

    let script = [
        ("convener", json!({"title": "Search for supersymmetry", "conveners": ["conv@example.org"], "analysis_team": ["at1@example.org"]})),
        ("convener", json!({"meeting_title": "EB kick-off", "meeting_date": "2020-03-02"})),
        ("pubcomm_chair", json!({"eb_members": ["eb1@example.org", "eb2@example.org"], "appointment_date": "2020-03-05"})),
        ("EB", json!({"goals_approved": false, "review_comments": "Clarify the goals"})),
        ("convener", json!({"meeting_title": "EB second round", "meeting_date": "2020-04-01"})),
        ("pubcomm_chair", json!({"eb_members": ["eb1@example.org", "eb3@example.org"], "appointment_date": "2020-04-03"})),
        ("EB", json!({"goals_approved": true})),
        ("po_officer", json!({"signoff_date": "2020-05-01"})),
    ];
    for (role, fields) in script {
        let from = inst.current_node.clone();
        let out = engine.proceed(&inst, &[role.to_string()], data(fields))?;
        inst = out.instance;
        let effects: Vec<&str> = out.effects.iter().map(|e| e.action.as_str()).collect();
        println!("{role:>13}: {from} -> {}  effects {effects:?}", inst.current_node);
    }

    // a wrong role is rejected without changing anything
    if let Err(e) = engine.proceed(&inst, &["EB".into()], Map::new()) {
        println!("rejected: {e}");
    }

    let replayed = engine.replay(&inst.history)?;
    assert_eq!(replayed, inst);
    engine.audit(&inst)?;
    println!("replay matches after {} history entries", inst.history.len());
    println!("effect log: {} entries", read_effects(&engine.effect_log())?.len());
    for m in read_outbox(&engine.outbox())? {
        println!("outbox {}: {:?}", m.template, m.subject);
    }
    Ok(())
}
