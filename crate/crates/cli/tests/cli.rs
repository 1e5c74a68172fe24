use std::fs;
use std::path::{Path, PathBuf};

use l3go::agent::BuildTranscript;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["l3go"];
    v.extend_from_slice(args);
    l3go_cli::run(v)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn exit_code_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    assert_eq!(run(&["build", "chair", "--out", p(&out), "--no-render"]), 0);
    assert_eq!(run(&["build", "chair", "--agent", "gpt", "--out", p(&out)]), 1);
    assert_eq!(run(&["build"]), 1);
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["build", "chair", "--backend", "ftp://x", "--out", p(&out)]), 1);
    assert_eq!(run(&["build", "chair", "--backend", "scripted:garbled", "--out", p(&out), "--no-render"]), 2);
    assert_eq!(run(&["build", "chair", "--backend", "scripted:always-error", "--out", p(&out), "--no-render"]), 3);
    let t = BuildTranscript::from_jsonl(&fs::read_to_string(out.join("transcript.jsonl")).unwrap()).unwrap();
    assert!(t.status.is_aborted());
}

#[test]
fn build_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("chair");
    let backend = format!("replay:{}", p(&fixtures().join("chair")));
    assert_eq!(run(&["build", "chair", "--backend", &backend, "--out", p(&out), "--size", "96"]), 0);
    for f in ["scene.json", "model.obj", "transcript.jsonl", "exchanges.jsonl", "run.json", "sheet.png", "turntable.gif"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read_dir(out.join("renders")).unwrap().count(), 10);
    let obj = fs::read_to_string(out.join("model.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("o ")).count(), 6);
}

#[test]
fn every_agent_builds_from_the_baseline_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let backend = format!("replay:{}", p(&fixtures().join("baselines_chair")));
    for agent in ["react", "reflexion", "single-shot"] {
        let out = tmp.path().join(agent);
        assert_eq!(run(&["build", "chair", "--agent", agent, "--backend", &backend, "--out", p(&out), "--no-render"]), 0, "{agent}");
    }
}

#[test]
fn replay_errors_and_empty_scenes() {
    let tmp = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(fixtures().join("golden/chair/transcript.jsonl")).unwrap();
    let lines: Vec<&str> = src.lines().collect();
    let truncated = tmp.path().join("truncated.jsonl");
    fs::write(&truncated, lines[..10].join("\n") + "\n" + &lines[10][..20]).unwrap();
    assert_eq!(run(&["replay", p(&truncated), "--out", p(&tmp.path().join("r1"))]), 1);

    let failed = tmp.path().join("failed");
    assert_eq!(run(&["build", "chair", "--backend", "scripted:always-error", "--out", p(&failed)]), 3);
    let out = tmp.path().join("r2");
    assert_eq!(run(&["replay", p(&failed.join("transcript.jsonl")), "--out", p(&out)]), 0);
    assert_eq!(fs::read_to_string(out.join("scene.json")).unwrap(), "{\n  \"parts\": []\n}\n");
    assert!(!out.join("renders").exists());
}

#[test]
fn render_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("views");
    let scene = fixtures().join("golden/chair/scene.json");
    assert_eq!(run(&["render", p(&scene), "--out", p(&out), "--views", "4", "--size", "64"]), 0);
    assert_eq!(fs::read_dir(out.join("renders")).unwrap().count(), 4);
    let bogus = tmp.path().join("bogus.json");
    fs::write(&bogus, "{\"parts\": 3}").unwrap();
    assert_eq!(run(&["render", p(&bogus), "--out", p(&out)]), 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[agent]\nkind = \"react\"\nmax_steps = 1\n[backend]\nspec = \"scripted:builder\"\n").unwrap();
    let out = tmp.path().join("o");
    assert_eq!(run(&["--config", p(&cfg), "build", "table", "--out", p(&out), "--no-render"]), 0);
    let info: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(info["agent"], "react");
    assert_eq!(info["status"], "MaxPartsReached");
    assert_eq!(run(&["--config", p(&cfg), "build", "table", "--agent", "l3go", "--out", p(&out), "--no-render"]), 0);
    let info: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(info["agent"], "l3go");

    fs::write(&cfg, "[agent]\nkind = \"nope\"\n").unwrap();
    assert_eq!(run(&["--config", p(&cfg), "build", "table", "--out", p(&out)]), 1);
    assert_eq!(run(&["--config", p(&tmp.path().join("missing.toml")), "build", "table"]), 1);
}

#[test]
fn recording_then_replaying_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, rec) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("rec"));
    assert_eq!(run(&["build", "lamp", "--record", p(&rec), "--out", p(&a), "--no-render"]), 0);
    let backend = format!("replay:{}", p(&rec));
    assert_eq!(run(&["build", "lamp", "--backend", &backend, "--out", p(&b), "--no-render"]), 0);
    assert_eq!(fs::read(a.join("transcript.jsonl")).unwrap(), fs::read(b.join("transcript.jsonl")).unwrap());
    assert_eq!(run(&["build", "sofa", "--backend", &backend, "--out", p(&b), "--no-render"]), 3);
}

#[test]
fn eval_needs_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("runs");
    fs::create_dir_all(empty.join("l3go")).unwrap();
    assert_eq!(run(&["eval", "shapenet13", "--runs", p(&empty), "--out", p(&tmp.path().join("e"))]), 1);
    assert_eq!(run(&["eval", "ufo", "--runs", p(&empty), "--models", "l3go,react", "--out", p(&tmp.path().join("u"))]), 1);
    assert_eq!(run(&["eval", "shapenet13", "--out", p(&tmp.path().join("e"))]), 1);
}

#[test]
fn eval_from_existing_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    for cat in l3go::eval::shapenet13() {
        let backend = format!("replay:{}", p(&fixtures().join("shapenet13").join(&cat)));
        let out = runs.join(&cat).join("00");
        assert_eq!(run(&["build", &cat, "--backend", &backend, "--out", p(&out), "--size", "64"]), 0, "{cat}");
    }
    let out = tmp.path().join("eval");
    assert_eq!(run(&["eval", "shapenet13", "--runs", p(&runs), "--out", p(&out)]), 0);
    assert_eq!(fs::read_to_string(out.join("records.jsonl")).unwrap().lines().count(), 13);
    let text = fs::read_to_string(out.join("accuracy.txt")).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with("| 1.000"), "{text}");
}
