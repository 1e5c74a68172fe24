//! Command-line driver: build objects with an agent, replay transcripts,
//! render scenes, and run the evaluation harness.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 aborted build,
//! 3 backend failure.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{BackendFailure, EvalOptions};
use config::{FileConfig, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "l3go", version, about = "Build 3D objects part by part with language-model agents")]
pub struct Cli {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build one object from a text prompt.
    Build {
        prompt: String,
        /// Output directory (default: runs/<prompt>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_render: bool,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the classification or pairwise-comparison evaluation.
    Eval {
        dataset: Dataset,
        /// Builds per category (shapenet13) or per prompt (ufo).
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Build the objects first instead of reading --runs.
        #[arg(long)]
        generate: bool,
        /// Directory of finished runs.
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        /// Judge backend; scripted:oracle always names the true category.
        #[arg(long)]
        judge: Option<String>,
        #[arg(long)]
        judge_model: Option<String>,
        /// Parallel build and judge sessions.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// The two agents to compare (ufo).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Rebuild a scene from the accepted actions of a transcript.
    Replay {
        transcript: PathBuf,
        /// Output directory (default: <transcript dir>/replay).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_render: bool,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Render turntable views, contact sheet and GIF for a scene file.
    Render {
        scene: PathBuf,
        /// Output directory (default: the scene's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dataset {
    Shapenet13,
    Ufo,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    #[arg(long, value_parser = ["l3go", "react", "reflexion", "single-shot"])]
    pub agent: Option<String>,
    /// replay:<dir>, scripted:<policy>, or an http(s) base URL.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Save every exchange to this replay directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub ablate_spatial_critic: bool,
    #[arg(long)]
    pub ablate_program_calc: bool,
    /// Directory of prompt template overrides.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub views: Option<usize>,
    /// Square render resolution in pixels.
    #[arg(long)]
    pub size: Option<u32>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            agent: self.agent.clone(),
            backend: self.backend.clone(),
            model: self.model.clone(),
            seed: self.seed,
            record: self.record.clone(),
            ablate_spatial_critic: self.ablate_spatial_critic,
            ablate_program_calc: self.ablate_program_calc,
            templates: self.templates.clone(),
            views: self.views,
            size: self.size,
        }
    }
}

fn resolve(file: &FileConfig, flags: &RunFlags) -> anyhow::Result<RunConfig> {
    config::resolve(file, &flags.overrides())
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Build { prompt, out, no_render, flags } => {
            let rc = resolve(&file, &flags)?;
            let out = out.or(file.output.dir.clone()).unwrap_or_else(|| commands::default_build_dir(&prompt));
            commands::cmd_build(&prompt, &rc, &out, !no_render)
        }
        Command::Replay { transcript, out, no_render, flags } => {
            let rc = resolve(&file, &flags)?;
            let out = out.unwrap_or_else(|| transcript.parent().unwrap_or(".".as_ref()).join("replay"));
            commands::cmd_replay(&transcript, &out, &rc, !no_render)
        }
        Command::Render { scene, out, flags } => {
            let rc = resolve(&file, &flags)?;
            let out = out.unwrap_or_else(|| scene.parent().unwrap_or(".".as_ref()).to_path_buf());
            commands::cmd_render(&scene, &out, &rc)
        }
        Command::Eval { dataset, n, generate, runs, out, judge, judge_model, jobs, models, flags } => {
            let rc = resolve(&file, &flags)?;
            if n == 0 {
                anyhow::bail!("--n must be at least 1");
            }
            let o = EvalOptions {
                n,
                generate,
                runs,
                out,
                judge: judge.or(file.judge.spec.clone()).unwrap_or_else(|| config::DEFAULT_JUDGE.into()),
                judge_model: judge_model
                    .or(file.judge.model.clone())
                    .unwrap_or_else(|| config::DEFAULT_JUDGE_MODEL.into()),
                jobs,
                models,
            };
            match dataset {
                Dataset::Shapenet13 => commands::cmd_eval_shapenet13(&rc, &o),
                Dataset::Ufo => commands::cmd_eval_ufo(&rc, &o),
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<BackendFailure>().is_some() {
                3
            } else {
                1
            }
        }
    }
}
