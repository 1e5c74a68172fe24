use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use l3go::agent::parse::ident;
use l3go::agent::{run_agent, AbortKind, AgentKind, BuildResult, BuildStatus, BuildTranscript};
use l3go::blenv::scene_json::scene_from_json;
use l3go::eval::{
    aggregate_accuracy, classify_mesh, shapenet13, ufo_manifest, ufo_prompts, AccuracyReport, EvalError, EvalRecord,
    JudgeConfig, RunRef, UNPARSABLE,
};
use l3go::gateway::{BackendSpec, ExchangeLog, Gateway, Transport};
use l3go::scripted::oracle_judge;

use crate::artifacts::{self, RunInfo};
use crate::config::RunConfig;

/// Marks a failure of the model or judge backend.
#[derive(Debug, thiserror::Error)]
#[error("backend failure: {0}")]
pub struct BackendFailure(pub String);

pub fn exit_code(status: &BuildStatus) -> i32 {
    match status {
        BuildStatus::Completed | BuildStatus::MaxPartsReached => 0,
        BuildStatus::Aborted { kind: AbortKind::Backend, .. } => 3,
        BuildStatus::Aborted { .. } => 2,
    }
}

pub fn connect(spec: &str, model: &str) -> Result<Arc<dyn Transport>> {
    let spec = BackendSpec::parse(spec, model)?;
    spec.connect().map_err(|e| anyhow!("cannot open backend: {e}"))
}

pub struct BuildOutcome {
    pub result: BuildResult,
    pub views: Vec<Vec<u8>>,
}

/// Runs one build and writes every artifact into `dir`.
pub fn build_into(dir: &Path, prompt: &str, rc: &RunConfig, render: bool) -> Result<BuildOutcome> {
    let transport = connect(&rc.backend, &rc.model)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let log_path = dir.join(artifacts::EXCHANGES_FILE);
    if log_path.exists() {
        fs::remove_file(&log_path)?;
    }
    let mut gw = Gateway::new(transport).with_log(ExchangeLog::to_file(&log_path)?);
    if let Some(rec) = &rc.record {
        fs::create_dir_all(rec).with_context(|| format!("creating {}", rec.display()))?;
        gw = gw.recording(Some(rec.clone()));
    }
    let result = run_agent(rc.kind, prompt, &rc.agent, &gw);
    artifacts::write(&dir.join(artifacts::TRANSCRIPT_FILE), result.transcript.to_jsonl())?;
    artifacts::write_scene(dir, &result.scene, &rc.rig.tessellation)?;
    let info = RunInfo {
        prompt: prompt.to_string(),
        agent: rc.kind.as_str().to_string(),
        status: result.transcript.status.label().to_string(),
        parts: result.scene.len(),
        seed: rc.agent.seed,
    };
    artifacts::write(&dir.join(artifacts::RUN_FILE), serde_json::to_string_pretty(&info)? + "\n")?;
    let views = if render { artifacts::write_renders(dir, &result.scene, &rc.rig)? } else { Vec::new() };
    Ok(BuildOutcome { result, views })
}

pub fn default_build_dir(prompt: &str) -> PathBuf {
    PathBuf::from("runs").join(ident(prompt))
}

pub fn cmd_build(prompt: &str, rc: &RunConfig, out: &Path, render: bool) -> Result<i32> {
    let o = build_into(out, prompt, rc, render)?;
    let status = &o.result.transcript.status;
    let names: Vec<&str> = o.result.scene.parts().map(|p| p.name.as_str()).collect();
    println!("{}: {} part(s) [{}] -> {}", status.label(), names.len(), names.join(", "), out.display());
    if let BuildStatus::Aborted { kind, reason } = status {
        eprintln!("build aborted ({kind:?}): {reason}");
    }
    Ok(exit_code(status))
}

pub fn cmd_replay(transcript: &Path, out: &Path, rc: &RunConfig, render: bool) -> Result<i32> {
    let text = fs::read_to_string(transcript).with_context(|| format!("reading {}", transcript.display()))?;
    let t = BuildTranscript::from_jsonl(&text).map_err(|e| anyhow!("{}: {e}", transcript.display()))?;
    let scene = t.replay_scene(rc.agent.touch_eps).map_err(|e| anyhow!("{}: {e}", transcript.display()))?;
    artifacts::write_scene(out, &scene, &rc.rig.tessellation)?;
    if render {
        artifacts::write_renders(out, &scene, &rc.rig)?;
    }
    println!("replayed {} part(s) -> {}", scene.len(), out.display());
    Ok(0)
}

pub fn cmd_render(scene_path: &Path, out: &Path, rc: &RunConfig) -> Result<i32> {
    let text = fs::read_to_string(scene_path).with_context(|| format!("reading {}", scene_path.display()))?;
    let scene = scene_from_json(&text).map_err(|e| anyhow!("{}: {e}", scene_path.display()))?;
    if scene.is_empty() {
        bail!("{}: scene has no parts to render", scene_path.display());
    }
    fs::create_dir_all(out)?;
    let views = artifacts::write_renders(out, &scene, &rc.rig)?;
    println!("rendered {} view(s) -> {}", views.len(), out.display());
    Ok(0)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub n: usize,
    pub generate: bool,
    pub runs: Option<PathBuf>,
    pub out: PathBuf,
    pub judge: String,
    pub judge_model: String,
    pub jobs: usize,
    pub models: Vec<String>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

enum Judge {
    Oracle,
    Backend(Arc<dyn Transport>),
}

impl Judge {
    fn open(spec: &str, model: &str) -> Result<Self> {
        if spec == "scripted:oracle" {
            return Ok(Judge::Oracle);
        }
        Ok(Judge::Backend(connect(spec, model)?))
    }

    fn gateway(&self, category: &str) -> Gateway {
        match self {
            Judge::Oracle => Gateway::new(oracle_judge(category)),
            Judge::Backend(t) => Gateway::new(t.clone()),
        }
    }
}

fn judge_object(
    object_id: String,
    category: &str,
    views: &[Vec<u8>],
    judge: &Judge,
    cfg: &JudgeConfig,
) -> Result<EvalRecord> {
    if views.is_empty() {
        return Ok(EvalRecord {
            object_id,
            true_category: category.into(),
            predicted: UNPARSABLE.into(),
            raw_reply: String::new(),
            refused: false,
        });
    }
    let j = classify_mesh(views, cfg, &judge.gateway(category)).map_err(|e| match e {
        EvalError::Backend(g) => anyhow::Error::new(BackendFailure(g.to_string())),
        other => anyhow::Error::new(other),
    })?;
    Ok(EvalRecord { object_id, true_category: category.into(), predicted: j.predicted, raw_reply: j.raw_reply, refused: j.refused })
}

pub fn write_eval_report(out: &Path, records: &[EvalRecord], label: &str) -> Result<AccuracyReport> {
    fs::create_dir_all(out)?;
    let mut jsonl = String::new();
    for r in records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    artifacts::write(&out.join("records.jsonl"), jsonl)?;
    let report = aggregate_accuracy(records);
    artifacts::write(&out.join("accuracy.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    artifacts::write(&out.join("accuracy.txt"), report.table(label))?;
    Ok(report)
}

pub fn cmd_eval_shapenet13(rc: &RunConfig, o: &EvalOptions) -> Result<i32> {
    let cats = shapenet13();
    let cfg = JudgeConfig::new(cats.clone());
    let judge = Judge::open(&o.judge, &o.judge_model)?;
    let pool = pool(o.jobs)?;

    let mut tasks: Vec<(String, PathBuf)> = Vec::new();
    for cat in &cats {
        if o.generate {
            tasks.extend((0..o.n).map(|k| (cat.clone(), o.out.join("runs").join(cat).join(format!("{k:02}")))));
        } else {
            let root = o.runs.as_ref().ok_or_else(|| anyhow!("--runs is required unless --generate is given"))?;
            let found = artifacts::find_runs(&root.join(cat)).unwrap_or_default();
            if found.is_empty() {
                return Err(EvalError::MissingRuns { model: rc.kind.as_str().into(), prompt: cat.clone() }.into());
            }
            tasks.extend(found.into_iter().take(o.n).map(|d| (cat.clone(), d)));
        }
    }

    let records: Vec<Result<EvalRecord>> = pool.install(|| {
        tasks
            .par_iter()
            .enumerate()
            .map(|(i, (cat, dir))| {
                let views = if o.generate {
                    let mut rc = rc.clone();
                    rc.backend = rc.backend.replace("{category}", cat);
                    rc.agent.seed = rc.agent.seed.wrapping_add((i % o.n.max(1)) as u64);
                    rc.record = rc.record.map(|r| r.join(cat));
                    build_into(dir, cat, &rc, true)?.views
                } else {
                    artifacts::read_views(dir)?
                };
                let id = dir.strip_prefix(o.runs.as_deref().unwrap_or(&o.out.join("runs"))).unwrap_or(dir);
                judge_object(id.display().to_string(), cat, &views, &judge, &cfg)
            })
            .collect()
    });
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;
    let report = write_eval_report(&o.out, &records, rc.kind.as_str())?;
    print!("{}", report.table(rc.kind.as_str()));
    println!("{} record(s), {} refusal(s), mean accuracy {:.3}", report.records, report.refusals, report.mean);
    Ok(0)
}

fn load_runs(root: &Path) -> Result<Vec<RunRef>> {
    artifacts::find_runs(root)?
        .into_iter()
        .map(|d| {
            let info = artifacts::read_run_info(&d)?;
            Ok(RunRef { prompt: info.prompt, gif: d.join(artifacts::GIF_FILE), sheet: d.join(artifacts::SHEET_FILE) })
        })
        .collect()
}

pub fn cmd_eval_ufo(rc: &RunConfig, o: &EvalOptions) -> Result<i32> {
    let prompts = ufo_prompts();
    let root = if o.generate { o.out.join("runs") } else {
        o.runs.clone().ok_or_else(|| anyhow!("--runs is required unless --generate is given"))?
    };
    let models: Vec<String> = if !o.models.is_empty() {
        o.models.clone()
    } else if o.generate {
        bail!("--generate for ufo needs --models naming two agents");
    } else {
        let mut names: Vec<String> = fs::read_dir(&root)
            .with_context(|| format!("listing {}", root.display()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    };
    if models.len() != 2 {
        bail!("ufo comparison needs exactly two models, found {}: {:?}", models.len(), models);
    }

    if o.generate {
        let mut tasks = Vec::new();
        for m in &models {
            let kind = AgentKind::parse(m).ok_or_else(|| anyhow!("unknown agent '{m}'"))?;
            for p in &prompts {
                for k in 0..o.n {
                    tasks.push((kind, p.clone(), k, root.join(m).join(ident(p)).join(format!("{k:02}"))));
                }
            }
        }
        let done: Vec<Result<()>> = pool(o.jobs)?.install(|| {
            tasks
                .par_iter()
                .map(|(kind, p, k, dir)| {
                    let mut rc = rc.clone();
                    rc.kind = *kind;
                    rc.agent.seed = rc.agent.seed.wrapping_add(*k as u64);
                    build_into(dir, p, &rc, true).map(|_| ())
                })
                .collect()
        });
        done.into_iter().collect::<Result<Vec<()>>>()?;
    }

    let a = load_runs(&root.join(&models[0])).unwrap_or_default();
    let b = load_runs(&root.join(&models[1])).unwrap_or_default();
    let rows = ufo_manifest((&models[0], &a), (&models[1], &b), &prompts, rc.agent.seed)?;
    fs::create_dir_all(&o.out)?;
    let mut jsonl = String::new();
    for r in &rows {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    let path = o.out.join("manifest.jsonl");
    artifacts::write(&path, jsonl)?;
    println!("{} manifest row(s) -> {}", rows.len(), path.display());
    Ok(0)
}
