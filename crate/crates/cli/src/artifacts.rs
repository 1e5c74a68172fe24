//! Files written for one build directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use l3go::blenv::scene_json::scene_to_json;
use l3go::blenv::SceneState;
use l3go::geometry::{export_obj, generate_primitive, Tessellation};
use l3go::render::{encode_png, make_contact_sheet, make_gif, render_turntable, CameraRig};

pub const SCENE_FILE: &str = "scene.json";
pub const OBJ_FILE: &str = "model.obj";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const EXCHANGES_FILE: &str = "exchanges.jsonl";
pub const RUN_FILE: &str = "run.json";
pub const RENDERS_DIR: &str = "renders";
pub const SHEET_FILE: &str = "sheet.png";
pub const GIF_FILE: &str = "turntable.gif";

/// Summary of a finished build, used to find runs again later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub prompt: String,
    pub agent: String,
    pub status: String,
    pub parts: usize,
    pub seed: u64,
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn write_scene(dir: &Path, scene: &SceneState, tess: &Tessellation) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir.join(SCENE_FILE), scene_to_json(scene))?;
    let meshes = scene
        .parts()
        .map(|p| Ok((p.name.clone(), generate_primitive(&p.spec, tess)?)))
        .collect::<Result<Vec<_>, l3go::geometry::GeometryError>>()?;
    write(&dir.join(OBJ_FILE), export_obj(&meshes)?)
}

pub fn view_file(k: usize) -> String {
    format!("view_{k:02}.png")
}

/// Writes the turntable views, contact sheet and GIF. Returns the view PNGs
/// in order, or nothing for an empty scene.
pub fn write_renders(dir: &Path, scene: &SceneState, rig: &CameraRig) -> Result<Vec<Vec<u8>>> {
    if scene.is_empty() {
        return Ok(Vec::new());
    }
    let views = render_turntable(scene, rig)?;
    let rdir = dir.join(RENDERS_DIR);
    fs::create_dir_all(&rdir).with_context(|| format!("creating {}", rdir.display()))?;
    let mut pngs = Vec::with_capacity(views.len());
    for (k, img) in views.iter().enumerate() {
        let png = encode_png(img)?;
        write(&rdir.join(view_file(k)), &png)?;
        pngs.push(png);
    }
    write(&dir.join(SHEET_FILE), encode_png(&make_contact_sheet(&views)?)?)?;
    write(&dir.join(GIF_FILE), make_gif(&views)?)?;
    Ok(pngs)
}

pub fn read_run_info(dir: &Path) -> Result<RunInfo> {
    let path = dir.join(RUN_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Every directory under `root` (inclusive) holding a run summary, sorted.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join(RUN_FILE).is_file() {
            out.push(dir.clone());
        }
        let entries = fs::read_dir(&dir).with_context(|| format!("listing {}", dir.display()))?;
        for e in entries {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Reads the view PNGs of a finished run back, in view order.
pub fn read_views(dir: &Path) -> Result<Vec<Vec<u8>>> {
    let rdir = dir.join(RENDERS_DIR);
    let mut views = Vec::new();
    for k in 0.. {
        let p = rdir.join(view_file(k));
        if !p.is_file() {
            break;
        }
        views.push(fs::read(&p).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(views)
}
