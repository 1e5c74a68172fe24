//! Part-by-part construction agents.
//!
//! [`run_l3go`] drives the six-stage loop: part proposal and critique,
//! spatial planning with voted coordinate programs, placement checked by the
//! spatial critic, and a completion check. [`run_react_b`],
//! [`run_reflexion_b`] and [`run_single_shot`] are the baselines.
//!
//! Every run yields a [`BuildResult`] whose transcript lists each model
//! exchange and environment step in order. Failures end the run with an
//! `Aborted` status but keep the partial scene and transcript.

mod baselines;
mod l3go;
pub mod parse;
mod templates;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::blenv::{parse_action_script, EnvError, SceneState, DEFAULT_TOUCH_EPS};
use crate::blenv::fmt_fixed;
use crate::dsl::VoteConfig;
use crate::gateway::{sha256_hex, ChatMessage, ChatRequest, Gateway, GatewayError};
use crate::geometry::{analytic_aabb, PrimitiveKind, PrimitiveSpec, Shape, Vec3};

pub use baselines::{run_react_b, run_reflexion_b, run_single_shot};
pub use l3go::run_l3go;
pub use templates::{Templates, TEMPLATE_NAMES};

/// Sampling temperature for generator components.
pub const GENERATOR_TEMPERATURE: f64 = 0.7;
/// Sampling temperature for critics and the completion check.
pub const CRITIC_TEMPERATURE: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub max_parts: usize,
    pub part_critic_rounds: usize,
    pub spatial_retry_rounds: usize,
    /// Step cap for the ReAct-style baselines.
    pub max_steps: usize,
    pub vote: VoteConfig,
    pub touch_eps: f64,
    pub ablate_spatial_critic: bool,
    pub ablate_program_calc: bool,
    pub seed: u64,
    pub templates: Templates,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_parts: 20,
            part_critic_rounds: 3,
            spatial_retry_rounds: 3,
            max_steps: 15,
            vote: VoteConfig::default(),
            touch_eps: DEFAULT_TOUCH_EPS,
            ablate_spatial_critic: false,
            ablate_program_calc: false,
            seed: 0,
            templates: Templates::builtin(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        let caps = [
            ("max_parts", self.max_parts),
            ("part_critic_rounds", self.part_critic_rounds),
            ("spatial_retry_rounds", self.spatial_retry_rounds),
            ("max_steps", self.max_steps),
            ("vote.samples", self.vote.samples),
        ];
        if let Some((name, _)) = caps.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be at least 1"));
        }
        if !(self.touch_eps.is_finite() && self.touch_eps > 0.0) {
            return Err(format!("touch_eps must be positive, got {}", self.touch_eps));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    L3go,
    React,
    Reflexion,
    SingleShot,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [AgentKind::L3go, AgentKind::React, AgentKind::Reflexion, AgentKind::SingleShot];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::L3go => "l3go",
            AgentKind::React => "react",
            AgentKind::Reflexion => "reflexion",
            AgentKind::SingleShot => "single-shot",
        }
    }

    pub fn parse(s: &str) -> Option<AgentKind> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

pub fn run_agent(kind: AgentKind, prompt: &str, cfg: &AgentConfig, gw: &Gateway) -> BuildResult {
    match kind {
        AgentKind::L3go => run_l3go(prompt, cfg, gw),
        AgentKind::React => run_react_b(prompt, cfg, gw),
        AgentKind::Reflexion => run_reflexion_b(prompt, cfg, gw),
        AgentKind::SingleShot => run_single_shot(prompt, cfg, gw),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartProposal {
    pub name: String,
    /// Width, depth and height.
    pub dims: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpec {
    pub base_part: String,
    pub relation: String,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error("unparsable response from {component}: {response:?}")]
    UnparsableResponse { component: String, response: String },
    #[error("no coordinate sample could be parsed and evaluated")]
    AllSamplesUnparsable,
    #[error("unknown base part '{0}'")]
    UnknownBasePart(String),
    #[error("script error: {0}")]
    Syntax(String),
    #[error("empty response")]
    EmptyResponse,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl AgentError {
    fn kind(&self) -> AbortKind {
        match self {
            AgentError::Backend(_) => AbortKind::Backend,
            AgentError::UnparsableResponse { .. } | AgentError::AllSamplesUnparsable | AgentError::EmptyResponse => {
                AbortKind::Unparsable
            }
            AgentError::UnknownBasePart(_) => AbortKind::UnknownBasePart,
            AgentError::Syntax(_) => AbortKind::Syntax,
            AgentError::Env(_) => AbortKind::Env,
            AgentError::Config(_) => AbortKind::Config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortKind {
    Backend,
    Unparsable,
    UnknownBasePart,
    Syntax,
    Env,
    Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum BuildStatus {
    Completed,
    MaxPartsReached,
    Aborted { kind: AbortKind, reason: String },
}

impl BuildStatus {
    pub fn is_aborted(&self) -> bool {
        matches!(self, BuildStatus::Aborted { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            BuildStatus::Completed => "Completed",
            BuildStatus::MaxPartsReached => "MaxPartsReached",
            BuildStatus::Aborted { .. } => "Aborted",
        }
    }
}

/// One model exchange or environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub component: String,
    pub prompt_sha256: Option<String>,
    pub prompt: Option<String>,
    pub response: Option<String>,
    pub parsed: Value,
    pub feedback: Option<String>,
    pub verdict: Option<String>,
}

/// Component id of the trailing record carrying the terminal status.
pub const STATUS_COMPONENT: &str = "status";
pub const ENV_COMPONENT: &str = "env";
pub const ENV_REMOVE_COMPONENT: &str = "env_remove";
pub const NOTE_COMPONENT: &str = "note";

#[derive(Debug, Clone, PartialEq)]
pub struct BuildTranscript {
    pub records: Vec<StepRecord>,
    pub status: BuildStatus,
}

#[derive(Debug, Error, PartialEq)]
#[error("corrupt transcript at line {line}: {message}")]
pub struct CorruptTranscript {
    pub line: usize,
    pub message: String,
}

impl BuildTranscript {
    /// JSONL with one object per record, then a status record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        let status = StepRecord {
            step: self.records.len() + 1,
            component: STATUS_COMPONENT.into(),
            prompt_sha256: None,
            prompt: None,
            response: None,
            parsed: serde_json::to_value(&self.status).expect("status serializes"),
            feedback: None,
            verdict: Some(self.status.label().into()),
        };
        out.push_str(&serde_json::to_string(&status).expect("record serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, CorruptTranscript> {
        let mut records = Vec::new();
        let mut status = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| CorruptTranscript { line: line_no, message };
            if status.is_some() {
                return Err(err("content after the status record".into()));
            }
            let rec: StepRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if rec.step != line_no {
                return Err(err(format!("expected step {line_no}, found {}", rec.step)));
            }
            if rec.component == STATUS_COMPONENT {
                status = Some(serde_json::from_value(rec.parsed).map_err(|e| err(e.to_string()))?);
            } else {
                records.push(rec);
            }
        }
        let status = status.ok_or_else(|| CorruptTranscript {
            line: text.lines().count() + 1,
            message: "missing status record (truncated file?)".into(),
        })?;
        Ok(BuildTranscript { records, status })
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.prompt.is_some())
    }

    /// Environment records whose verdict is a rejection.
    pub fn rejections(&self) -> impl Iterator<Item = &StepRecord> {
        self.records
            .iter()
            .filter(|r| r.component == ENV_COMPONENT && r.verdict.as_deref().is_some_and(|v| v.starts_with("rejected")))
    }

    /// Rebuilds the scene from accepted actions and removals.
    pub fn replay_scene(&self, touch_eps: f64) -> Result<SceneState, CorruptTranscript> {
        let mut scene = SceneState::new();
        for r in &self.records {
            let err = |message: String| CorruptTranscript { line: r.step, message };
            match r.component.as_str() {
                ENV_COMPONENT if r.verdict.as_deref().is_some_and(|v| v.starts_with("accepted")) => {
                    let line = r.parsed.get("action").and_then(Value::as_str).ok_or_else(|| err("env record without action".into()))?;
                    let spec = parse_action_script(line).map_err(|e| err(e.to_string()))?;
                    let [spec] = <[PrimitiveSpec; 1]>::try_from(spec).map_err(|_| err("expected one action".into()))?;
                    scene = scene.apply_action(&spec, touch_eps).map_err(|e| err(e.to_string()))?.0;
                }
                ENV_REMOVE_COMPONENT => {
                    let name = r.parsed.get("name").and_then(Value::as_str).ok_or_else(|| err("removal without name".into()))?;
                    scene = scene.remove_part(name).map_err(|e| err(e.to_string()))?;
                }
                _ => {}
            }
        }
        Ok(scene)
    }
}

#[derive(Debug, Clone)]
pub struct BuildResult {
    pub scene: SceneState,
    pub transcript: BuildTranscript,
    pub prompt: String,
}

/// Maps proposal dims onto kind-specific parameters, centered at `center`.
pub fn spec_from_dims(name: &str, kind: PrimitiveKind, dims: Vec3, center: Vec3, label: &str) -> PrimitiveSpec {
    let footprint = dims.x.min(dims.y) / 2.0;
    match kind {
        PrimitiveKind::Cube => PrimitiveSpec::new(name, Shape::Cube, center).with_scale(dims),
        PrimitiveKind::Cylinder => PrimitiveSpec::new(name, Shape::Cylinder { radius: footprint, depth: dims.z }, center),
        PrimitiveKind::Cone => {
            let radius_top = if label.to_ascii_lowercase().contains("frustum") { footprint / 2.0 } else { 0.0 };
            PrimitiveSpec::new(name, Shape::Cone { radius_bottom: footprint, radius_top, depth: dims.z }, center)
        }
        PrimitiveKind::Sphere => {
            let radius = dims.min_element() / 2.0;
            let scale = Vec3::new(dims.x, dims.y, dims.z) * (0.5 / radius);
            PrimitiveSpec::new(name, Shape::Sphere { radius }, center).with_scale(scale)
        }
        PrimitiveKind::Torus => {
            let (mut major, mut minor) = (dims.x / 2.0 - dims.z / 4.0, dims.z / 2.0);
            if major <= minor {
                major = dims.x / 3.0;
                minor = dims.x / 6.0;
            }
            PrimitiveSpec::new(name, Shape::Torus { major_radius: major, minor_radius: minor }, center)
        }
    }
}

fn v3(v: Vec3) -> String {
    format!("({}, {}, {})", fmt_fixed(v.x, 3), fmt_fixed(v.y, 3), fmt_fixed(v.z, 3))
}

fn dims_text(d: Vec3) -> String {
    format!("{}, {}, {}", fmt_fixed(d.x, 3), fmt_fixed(d.y, 3), fmt_fixed(d.z, 3))
}

fn vec_json(v: Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

/// Shared state of one build.
struct Session<'a> {
    cfg: &'a AgentConfig,
    gw: &'a Gateway,
    object: String,
    scene: SceneState,
    records: Vec<StepRecord>,
}

impl<'a> Session<'a> {
    fn new(prompt: &str, cfg: &'a AgentConfig, gw: &'a Gateway) -> Self {
        Session { cfg, gw, object: prompt.trim().to_string(), scene: SceneState::new(), records: Vec::new() }
    }

    fn finish(self, status: BuildStatus) -> BuildResult {
        BuildResult {
            scene: self.scene,
            transcript: BuildTranscript { records: self.records, status },
            prompt: self.object,
        }
    }

    fn finish_with(self, outcome: Result<BuildStatus, AgentError>) -> BuildResult {
        let status = match outcome {
            Ok(s) => s,
            Err(e) => BuildStatus::Aborted { kind: e.kind(), reason: e.to_string() },
        };
        self.finish(status)
    }

    fn render(&self, name: &str, vars: &[(&str, &str)]) -> String {
        let mut all: Vec<(&str, &str)> = vec![("object", self.object.as_str())];
        all.extend_from_slice(vars);
        self.cfg.templates.render(name, &all)
    }

    fn request(&self, tag: &str, prompt: &str, temperature: f64) -> ChatRequest {
        ChatRequest::new(
            tag,
            vec![ChatMessage::system(self.cfg.templates.get("preamble")), ChatMessage::user(prompt)],
        )
        .temperature(temperature)
    }

    fn push(&mut self, mut rec: StepRecord) -> usize {
        rec.step = self.records.len() + 1;
        self.records.push(rec);
        self.records.len() - 1
    }

    fn push_exchange(&mut self, tag: &str, prompt: &str, out: &Result<String, GatewayError>) -> usize {
        self.push(StepRecord {
            step: 0,
            component: tag.to_string(),
            prompt_sha256: Some(sha256_hex(prompt.as_bytes())),
            prompt: Some(prompt.to_string()),
            response: out.as_ref().ok().cloned(),
            parsed: Value::Null,
            feedback: None,
            verdict: out.as_ref().err().map(|e| format!("error: {e}")),
        })
    }

    fn ask(&mut self, tag: &str, prompt: &str, temperature: f64) -> Result<(usize, String), AgentError> {
        let out = self.gw.complete(&self.request(tag, prompt, temperature));
        let idx = self.push_exchange(tag, prompt, &out);
        Ok((idx, out?))
    }

    /// Asks, and reprompts once with `hint` if `parse` rejects the reply.
    fn ask_parsed<T>(
        &mut self,
        tag: &str,
        prompt: &str,
        temperature: f64,
        hint: &str,
        parse: impl Fn(&str) -> Option<T>,
        show: impl Fn(&T) -> Value,
    ) -> Result<Result<T, String>, AgentError> {
        let (idx, reply) = self.ask(tag, prompt, temperature)?;
        if let Some(v) = parse(&reply) {
            self.records[idx].parsed = show(&v);
            return Ok(Ok(v));
        }
        self.records[idx].verdict = Some("unparsable".into());
        let retry = format!("{prompt}\nYour previous reply did not follow the required format. {hint}\n");
        let (idx, reply) = self.ask(tag, &retry, temperature)?;
        match parse(&reply) {
            Some(v) => {
                self.records[idx].parsed = show(&v);
                Ok(Ok(v))
            }
            None => {
                self.records[idx].verdict = Some("unparsable".into());
                Ok(Err(reply))
            }
        }
    }

    fn note(&mut self, text: impl Into<String>) {
        self.push(StepRecord {
            step: 0,
            component: NOTE_COMPONENT.into(),
            prompt_sha256: None,
            prompt: None,
            response: None,
            parsed: Value::Null,
            feedback: Some(text.into()),
            verdict: None,
        });
    }

    fn env_record(&mut self, spec: &PrimitiveSpec, feedback: Option<String>, verdict: String) {
        self.push(StepRecord {
            step: 0,
            component: ENV_COMPONENT.into(),
            prompt_sha256: None,
            prompt: None,
            response: None,
            parsed: json!({ "action": crate::blenv::format_action(spec) }),
            feedback,
            verdict: Some(verdict),
        });
    }

    fn remove(&mut self, name: &str, why: &str) -> Result<(), AgentError> {
        self.scene = self.scene.remove_part(name)?;
        self.push(StepRecord {
            step: 0,
            component: ENV_REMOVE_COMPONENT.into(),
            prompt_sha256: None,
            prompt: None,
            response: None,
            parsed: json!({ "name": name }),
            feedback: Some(why.to_string()),
            verdict: Some("removed".into()),
        });
        Ok(())
    }

    fn parts_so_far(&self) -> String {
        if self.scene.is_empty() {
            return "(none)".into();
        }
        self.scene
            .parts()
            .map(|p| {
                format!(
                    "- {} ({}): center {}, size {}, min {}, max {}",
                    p.name,
                    p.spec.kind(),
                    v3(p.aabb.center()),
                    v3(p.aabb.size()),
                    v3(p.aabb.min),
                    v3(p.aabb.max)
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// A scene-unique identifier for `label`.
    fn unique_name(&mut self, label: &str) -> String {
        let base = parse::ident(label);
        if !self.scene.contains(&base) {
            return base;
        }
        let name = (2..).map(|i| format!("{base}_{i}")).find(|n| !self.scene.contains(n)).unwrap();
        self.note(format!("part name '{base}' already exists; using '{name}'"));
        name
    }
}

/// Analytic box size of `kind` built from `dims`.
fn mapped_size(kind: PrimitiveKind, dims: Vec3) -> Vec3 {
    analytic_aabb(&spec_from_dims("probe", kind, dims, Vec3::ZERO, "")).map(|b| b.size()).unwrap_or(dims)
}
