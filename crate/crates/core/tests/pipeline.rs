use std::sync::Arc;

use l3go::agent::{run_agent, AgentConfig, AgentKind, BuildStatus, BuildTranscript};
use l3go::blenv::scene_json::{scene_from_json, scene_to_json};
use l3go::eval::{aggregate_accuracy, classify_mesh, EvalRecord, JudgeConfig};
use l3go::gateway::{Gateway, ReplayBackend};
use l3go::render::{encode_png, render_turntable, CameraRig};
use l3go::scripted::{named_policy, oracle_judge};

fn small_rig() -> CameraRig {
    CameraRig { width: 64, height: 64, ..CameraRig::default() }
}

#[test]
fn each_agent_records_and_replays_identically() {
    for kind in AgentKind::ALL {
        let gw = Gateway::new(named_policy("builder").unwrap()).recording(None);
        let live = run_agent(kind, "table", &AgentConfig::default(), &gw);
        assert!(!live.transcript.status.is_aborted(), "{kind:?}: {:?}", live.transcript.status);
        assert!(!live.scene.is_empty());

        let store = Arc::new(gw.recorded_store().unwrap());
        let replayed = run_agent(kind, "table", &AgentConfig::default(), &Gateway::new(Arc::new(ReplayBackend::new(store))));
        assert_eq!(live.transcript.to_jsonl(), replayed.transcript.to_jsonl(), "{kind:?}");

        let text = live.transcript.to_jsonl();
        let back = BuildTranscript::from_jsonl(&text).unwrap();
        let scene = back.replay_scene(1e-3).unwrap();
        assert_eq!(scene_to_json(&scene), scene_to_json(&live.scene), "{kind:?}");
    }
}

#[test]
fn build_render_judge() {
    let gw = Gateway::new(named_policy("builder").unwrap());
    let res = run_agent(AgentKind::L3go, "lamp", &AgentConfig::default(), &gw);
    assert_eq!(res.transcript.status, BuildStatus::Completed);
    let round = scene_from_json(&scene_to_json(&res.scene)).unwrap();
    let views = render_turntable(&round, &small_rig()).unwrap();
    let pngs: Vec<Vec<u8>> = views.iter().map(|v| encode_png(v).unwrap()).collect();

    let judge = JudgeConfig::shapenet13();
    let j = classify_mesh(&pngs, &judge, &Gateway::new(oracle_judge("lamp"))).unwrap();
    let miss = classify_mesh(&pngs, &judge, &Gateway::new(oracle_judge("I cannot assist with this request."))).unwrap();
    assert!(miss.refused);
    let records: Vec<EvalRecord> = [j, miss]
        .into_iter()
        .enumerate()
        .map(|(i, j)| EvalRecord {
            object_id: format!("lamp/{i}"),
            true_category: "lamp".into(),
            predicted: j.predicted,
            raw_reply: j.raw_reply,
            refused: j.refused,
        })
        .collect();
    let report = aggregate_accuracy(&records);
    assert_eq!(report.mean, 0.5);
    assert_eq!(report.refusals, 1);
}
