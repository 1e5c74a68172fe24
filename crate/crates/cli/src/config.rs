//! TOML run configuration. Every section and key is optional; command-line
//! flags override whatever the file sets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use l3go::agent::{AgentConfig, AgentKind, Templates};
use l3go::dsl::VoteConfig;
use l3go::geometry::Tessellation;
use l3go::render::CameraRig;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub judge: JudgeSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub kind: Option<String>,
    pub max_parts: Option<usize>,
    pub part_critic_rounds: Option<usize>,
    pub spatial_retry_rounds: Option<usize>,
    pub max_steps: Option<usize>,
    pub vote_samples: Option<usize>,
    pub vote_decimals: Option<u32>,
    pub touch_eps: Option<f64>,
    pub ablate_spatial_critic: Option<bool>,
    pub ablate_program_calc: Option<bool>,
    pub seed: Option<u64>,
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub spec: Option<String>,
    pub model: Option<String>,
    pub record: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    pub n_views: Option<usize>,
    pub elevation_deg: Option<f64>,
    pub frame_margin: Option<f64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub segments: Option<u32>,
    pub rings: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSection {
    pub spec: Option<String>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

pub const DEFAULT_BACKEND: &str = "scripted:builder";
pub const DEFAULT_MODEL: &str = "gpt-4";
pub const DEFAULT_JUDGE: &str = "scripted:oracle";
pub const DEFAULT_JUDGE_MODEL: &str = "gpt-4-vision-preview";

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved settings for one build.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: AgentKind,
    pub agent: AgentConfig,
    pub backend: String,
    pub model: String,
    pub record: Option<PathBuf>,
    pub rig: CameraRig,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub agent: Option<String>,
    pub backend: Option<String>,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub record: Option<PathBuf>,
    pub ablate_spatial_critic: bool,
    pub ablate_program_calc: bool,
    pub templates: Option<PathBuf>,
    pub views: Option<usize>,
    pub size: Option<u32>,
}

pub fn resolve(file: &FileConfig, o: &Overrides) -> Result<RunConfig> {
    let a = &file.agent;
    let kind_name = o.agent.clone().or_else(|| a.kind.clone()).unwrap_or_else(|| "l3go".into());
    let Some(kind) = AgentKind::parse(&kind_name) else {
        bail!("unknown agent '{kind_name}' (expected one of l3go, react, reflexion, single-shot)");
    };
    let defaults = AgentConfig::default();
    let templates = match o.templates.as_ref().or(a.templates.as_ref()) {
        Some(dir) => Templates::with_overrides(dir).with_context(|| format!("loading templates from {}", dir.display()))?,
        None => Templates::builtin(),
    };
    let agent = AgentConfig {
        max_parts: a.max_parts.unwrap_or(defaults.max_parts),
        part_critic_rounds: a.part_critic_rounds.unwrap_or(defaults.part_critic_rounds),
        spatial_retry_rounds: a.spatial_retry_rounds.unwrap_or(defaults.spatial_retry_rounds),
        max_steps: a.max_steps.unwrap_or(defaults.max_steps),
        vote: VoteConfig {
            samples: a.vote_samples.unwrap_or(defaults.vote.samples),
            decimals: a.vote_decimals.unwrap_or(defaults.vote.decimals),
        },
        touch_eps: a.touch_eps.unwrap_or(defaults.touch_eps),
        ablate_spatial_critic: o.ablate_spatial_critic || a.ablate_spatial_critic.unwrap_or(false),
        ablate_program_calc: o.ablate_program_calc || a.ablate_program_calc.unwrap_or(false),
        seed: o.seed.or(a.seed).unwrap_or(defaults.seed),
        templates,
    };
    if let Err(e) = agent.validate() {
        bail!("invalid agent settings: {e}");
    }
    let r = &file.render;
    let base = CameraRig::default();
    let size = o.size;
    let rig = CameraRig {
        n_views: o.views.or(r.n_views).unwrap_or(base.n_views),
        elevation_deg: r.elevation_deg.unwrap_or(base.elevation_deg),
        frame_margin: r.frame_margin.unwrap_or(base.frame_margin),
        width: size.or(r.width).unwrap_or(base.width),
        height: size.or(r.height).unwrap_or(base.height),
        tessellation: Tessellation {
            segments: r.segments.unwrap_or(base.tessellation.segments),
            rings: r.rings.unwrap_or(base.tessellation.rings),
        },
    };
    rig.validate().map_err(|e| anyhow::anyhow!("invalid render settings: {e}"))?;
    Ok(RunConfig {
        kind,
        agent,
        backend: o.backend.clone().or_else(|| file.backend.spec.clone()).unwrap_or_else(|| DEFAULT_BACKEND.into()),
        model: o.model.clone().or_else(|| file.backend.model.clone()).unwrap_or_else(|| DEFAULT_MODEL.into()),
        record: o.record.clone().or_else(|| file.backend.record.clone()),
        rig,
    })
}
