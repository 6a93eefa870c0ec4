mod common;

use common::{add, fuzz_config, random_trace, Fuzzer};
use prewrite_core::persist::{self, PersistError};
use prewrite_core::sim::{parse_trace, simulate, SimConfig, Simulator};
use prewrite_core::{CanvasDocument, EventKind, NodeKind, TaskId};
use proptest::prelude::*;

#[test]
fn save_load_examples() {
    let mut doc = CanvasDocument::with_defaults(0);
    for i in 0..10 {
        add(&mut doc, NodeKind::ALL[i % 3], &format!("node {i}"), i as f64 * 31.7, i as f64 * 0.1);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("doc.json");
    persist::save(&doc, &path).unwrap();
    assert_eq!(persist::load(&path).unwrap(), doc);
    let first = std::fs::read(&path).unwrap();
    persist::save(&doc.clone(), &path).unwrap();
    assert_eq!(first, std::fs::read(&path).unwrap());

    let text = String::from_utf8(first).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
    assert!(matches!(persist::from_json(&text), Err(PersistError::UnsupportedVersion { found: 99 })));
}

#[test]
fn canonical_json_sorts_keys() {
    let json = persist::to_json(&CanvasDocument::with_defaults(0));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(json.find("\"cursor\"").unwrap() < json.find("\"schema_version\"").unwrap());
}

#[test]
fn simulate_examples() {
    let log = simulate(&Default::default(), 0, SimConfig::default()).unwrap();
    assert!(!log.iter().any(|e| matches!(e.event, EventKind::Dispatch { .. })));

    let trace = parse_trace(
        r#"{"actions":[
            {"at":0,"do":"add_node","kind":"keyword","text":"travel","x":40,"y":40},
            {"at":15000,"do":"wait"}
        ]}"#,
    )
    .unwrap();
    let log = simulate(&trace, 8, SimConfig::default()).unwrap();
    let count = |t: TaskId| log.iter().filter(|e| matches!(&e.event, EventKind::Dispatch { task_id, .. } if *task_id == t)).count();
    assert!(count(TaskId(1)) >= 1);
    assert_eq!(count(TaskId(2)), 0);
    assert_eq!(log, simulate(&trace, 8, SimConfig::default()).unwrap());
}

#[test]
fn saved_run_continues_identically() {
    for seed in 0..6 {
        let trace = random_trace(seed, 120);
        let cfg = fuzz_config(seed % 2 == 0);
        let full = simulate(&trace, seed, cfg).unwrap();

        let cut = trace.actions[60].at;
        let mut sim = Simulator::new(seed, cfg);
        let (head, tail): (Vec<_>, Vec<_>) = trace.actions.iter().partition(|a| a.at <= cut);
        let step = |sim: &mut Simulator, a: &prewrite_core::sim::TimedAction| {
            sim.run_until(a.at);
            if let Err(e) = sim.apply(&a.action) {
                let now = sim.now();
                sim.engine_mut().doc_mut().log_error(now, None, None, e.to_string());
            }
        };
        for a in &head {
            step(&mut sim, a);
        }
        sim.run_until(cut);
        let json = persist::to_json(sim.doc());
        let mut resumed = Simulator::resume(persist::from_json(&json).unwrap(), seed, cfg, cut);
        for a in &tail {
            step(&mut resumed, a);
        }
        resumed.run_until(trace.end());
        assert_eq!(resumed.doc().event_log(), &full[..], "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replay_reconstructs_document(seed in any::<u64>(), len in 1usize..200) {
        let mut sim = Simulator::new(seed, fuzz_config(seed % 2 == 1));
        sim.run_script(&random_trace(seed, len)).unwrap();
        prop_assert_eq!(&CanvasDocument::replay(sim.doc().event_log()).unwrap(), sim.doc());
    }

    #[test]
    fn persistence_round_trips(seed in any::<u64>()) {
        let mut f = Fuzzer::new(seed, fuzz_config(false));
        f.run(150);
        let json = persist::to_json(f.sim.doc());
        let back = persist::from_json(&json).unwrap();
        prop_assert_eq!(&back, f.sim.doc());
        prop_assert_eq!(persist::to_json(&back), json);
    }
}
