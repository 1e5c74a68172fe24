//! Bundled replay fixtures. Each store is what the named scripted policy
//! answers for the listed runs; this test fails when a store no longer
//! matches (for example after a template edit). Regenerate with
//! `L3GO_BLESS=1 cargo test -p l3go-core --test fixtures`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use l3go::agent::{run_agent, AgentConfig, AgentKind};
use l3go::blenv::scene_json::scene_to_json;
use l3go::eval::shapenet13;
use l3go::gateway::{Gateway, ReplayBackend, ReplayStore};
use l3go::scripted::named_policy;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn blessing() -> bool {
    std::env::var("L3GO_BLESS").is_ok_and(|v| v == "1")
}

struct Run {
    kind: AgentKind,
    prompt: String,
    ablate_spatial_critic: bool,
}

fn run(kind: AgentKind, prompt: &str) -> Run {
    Run { kind, prompt: prompt.into(), ablate_spatial_critic: false }
}

struct Fixture {
    dir: String,
    policy: &'static str,
    runs: Vec<Run>,
}

fn fixtures() -> Vec<Fixture> {
    let mut out = vec![
        Fixture { dir: "chair".into(), policy: "builder", runs: vec![run(AgentKind::L3go, "chair")] },
        Fixture {
            dir: "faulty_leg".into(),
            policy: "faulty-leg",
            runs: vec![
                run(AgentKind::L3go, "chair"),
                Run { ablate_spatial_critic: true, ..run(AgentKind::L3go, "chair") },
            ],
        },
        Fixture {
            dir: "baselines_chair".into(),
            policy: "builder",
            runs: vec![
                run(AgentKind::React, "chair"),
                run(AgentKind::Reflexion, "chair"),
                run(AgentKind::SingleShot, "chair"),
            ],
        },
    ];
    for cat in shapenet13() {
        out.push(Fixture { dir: format!("shapenet13/{cat}"), policy: "builder", runs: vec![run(AgentKind::L3go, &cat)] });
    }
    out
}

fn cfg(r: &Run) -> AgentConfig {
    AgentConfig { ablate_spatial_critic: r.ablate_spatial_critic, ..AgentConfig::default() }
}

fn record(f: &Fixture) -> ReplayStore {
    let mut store = ReplayStore::default();
    for r in &f.runs {
        let gw = Gateway::new(named_policy(f.policy).unwrap()).recording(None);
        let res = run_agent(r.kind, &r.prompt, &cfg(r), &gw);
        assert!(!res.transcript.status.is_aborted(), "{} {}: {:?}", f.dir, r.prompt, res.transcript.status);
        for ex in gw.recorded_store().unwrap().exchanges() {
            store.insert(ex.clone());
        }
    }
    store
}

fn bless_store(dir: &Path, store: &ReplayStore) {
    if dir.exists() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "json") {
                fs::remove_file(p).unwrap();
            }
        }
    }
    store.save(dir).unwrap();
}

#[test]
fn replay_stores_match_scripted_policies() {
    for f in fixtures() {
        let dir = root().join(&f.dir);
        let fresh = record(&f);
        if blessing() {
            bless_store(&dir, &fresh);
            continue;
        }
        let on_disk = ReplayStore::load(&dir).unwrap_or_else(|e| panic!("{}: {e}; rerun with L3GO_BLESS=1", f.dir));
        assert_eq!(on_disk.len(), fresh.len(), "{}: stale fixture; rerun with L3GO_BLESS=1", f.dir);
        assert!(on_disk == fresh, "{}: stale fixture; rerun with L3GO_BLESS=1", f.dir);
    }
    check_chair_goldens();
}

/// Transcript and scene produced by replaying the chair store.
fn check_chair_goldens() {
    let store = Arc::new(ReplayStore::load(&root().join("chair")).unwrap());
    let gw = Gateway::new(Arc::new(ReplayBackend::new(store)));
    let res = run_agent(AgentKind::L3go, "chair", &AgentConfig::default(), &gw);
    let transcript = res.transcript.to_jsonl();
    let scene = scene_to_json(&res.scene);
    let golden = root().join("golden/chair");
    if blessing() {
        fs::create_dir_all(&golden).unwrap();
        fs::write(golden.join("transcript.jsonl"), &transcript).unwrap();
        fs::write(golden.join("scene.json"), &scene).unwrap();
        return;
    }
    assert_eq!(transcript, fs::read_to_string(golden.join("transcript.jsonl")).unwrap());
    assert_eq!(scene, fs::read_to_string(golden.join("scene.json")).unwrap());
}
