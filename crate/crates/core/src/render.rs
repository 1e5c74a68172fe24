//! Turntable rendering: orthographic views around the vertical axis, flat
//! Lambert shading, z-buffered triangles, light gray on black.

use std::io::Cursor;

use image::{GrayImage, ImageEncoder, Luma};
use thiserror::Error;

use crate::blenv::SceneState;
use crate::geometry::{generate_primitive, GeometryError, Mesh, Tessellation, Vec3};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("cannot render an empty scene")]
    EmptyScene,
    #[error("at least one image is required")]
    EmptyInput,
    #[error("invalid camera rig: {0}")]
    InvalidRig(String),
    #[error("images differ in size")]
    SizeMismatch,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("encoding failed: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    pub n_views: usize,
    pub elevation_deg: f64,
    /// View half-width as a multiple of the scene's bounding-sphere radius.
    pub frame_margin: f64,
    pub width: u32,
    pub height: u32,
    pub tessellation: Tessellation,
}

impl Default for CameraRig {
    fn default() -> Self {
        CameraRig {
            n_views: 10,
            elevation_deg: 30.0,
            frame_margin: 1.2,
            width: 512,
            height: 512,
            tessellation: Tessellation::default(),
        }
    }
}

impl CameraRig {
    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: &str| Err(RenderError::InvalidRig(m.to_string()));
        if self.n_views == 0 {
            return bad("n_views must be at least 1");
        }
        if !(self.frame_margin.is_finite() && self.frame_margin >= 1.0) {
            return bad("frame_margin must be at least 1");
        }
        if !(self.elevation_deg.is_finite() && self.elevation_deg.abs() < 90.0) {
            return bad("elevation must lie strictly between -90 and 90 degrees");
        }
        if self.width == 0 || self.height == 0 || self.width > 4096 || self.height > 4096 {
            return bad("resolution must be between 1 and 4096 pixels per side");
        }
        self.tessellation.validate()?;
        Ok(())
    }

    /// Azimuth of each view in degrees.
    pub fn azimuths(&self) -> Vec<f64> {
        (0..self.n_views).map(|k| k as f64 * 360.0 / self.n_views as f64).collect()
    }
}

/// Gray level for a face whose normal meets the light at `cos`.
fn shade(cos: f64) -> u8 {
    (40.0 + 180.0 * cos.clamp(0.0, 1.0)).round() as u8
}

struct View {
    eye: Vec3,
    right: Vec3,
    up: Vec3,
    light: Vec3,
}

impl View {
    fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        // Azimuth 0 looks at the object's front (+y) from in front of it.
        let eye = Vec3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin());
        let forward = eye * -1.0;
        let right = forward.cross(Vec3::new(0.0, 0.0, 1.0)).normalized();
        let up = right.cross(forward);
        let light = (eye + up * 0.6 + right * -0.4).normalized();
        View { eye, right, up, light }
    }
}

pub fn render_turntable(scene: &SceneState, rig: &CameraRig) -> Result<Vec<GrayImage>, RenderError> {
    rig.validate()?;
    let bounds = scene.bounds().ok_or(RenderError::EmptyScene)?;
    let meshes = scene
        .parts()
        .map(|p| generate_primitive(&p.spec, &rig.tessellation))
        .collect::<Result<Vec<Mesh>, _>>()?;
    let center = bounds.center();
    let radius = (bounds.size().length() / 2.0).max(1e-9);
    Ok(rig
        .azimuths()
        .into_iter()
        .map(|az| rasterize(&meshes, center, radius * rig.frame_margin, &View::new(az, rig.elevation_deg), rig))
        .collect())
}

fn rasterize(meshes: &[Mesh], center: Vec3, half_extent: f64, view: &View, rig: &CameraRig) -> GrayImage {
    let (w, h) = (rig.width as usize, rig.height as usize);
    let scale = w.min(h) as f64 / 2.0 / half_extent;
    let mut depth = vec![f64::NEG_INFINITY; w * h];
    let mut img = GrayImage::new(rig.width, rig.height);
    let project = |p: Vec3| {
        let d = p - center;
        (w as f64 / 2.0 + d.dot(view.right) * scale, h as f64 / 2.0 - d.dot(view.up) * scale, d.dot(view.eye))
    };
    for mesh in meshes {
        let screen: Vec<(f64, f64, f64)> = mesh.vertices.iter().map(|&v| project(v)).collect();
        for tri in &mesh.triangles {
            let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
            let n = (b - a).cross(c - a);
            let len = n.length();
            if len == 0.0 || n.dot(view.eye) <= 0.0 {
                continue;
            }
            let gray = shade(n.dot(view.light) / len);
            let [p0, p1, p2] = tri.map(|i| screen[i as usize]);
            fill(&mut img, &mut depth, w, h, [p0, p1, p2], gray);
        }
    }
    img
}

fn edge(a: (f64, f64, f64), b: (f64, f64, f64), x: f64, y: f64) -> f64 {
    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
}

fn fill(img: &mut GrayImage, depth: &mut [f64], w: usize, h: usize, p: [(f64, f64, f64); 3], gray: u8) {
    let area = edge(p[0], p[1], p[2].0, p[2].1);
    if area == 0.0 {
        return;
    }
    let min_x = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let max_x = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(w as f64) as usize;
    let min_y = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
    let max_y = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(h as f64) as usize;
    for y in min_y..max_y {
        for x in min_x..max_x {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let w0 = edge(p[1], p[2], px, py) / area;
            let w1 = edge(p[2], p[0], px, py) / area;
            let w2 = edge(p[0], p[1], px, py) / area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            let z = w0 * p[0].2 + w1 * p[1].2 + w2 * p[2].2;
            let idx = y * w + x;
            if z > depth[idx] {
                depth[idx] = z;
                img.put_pixel(x as u32, y as u32, Luma([gray]));
            }
        }
    }
}

pub fn lit_pixels(img: &GrayImage) -> usize {
    img.pixels().filter(|p| p.0[0] > 0).count()
}

/// 8-bit grayscale PNG bytes.
pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>, RenderError> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(Cursor::new(&mut out))
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::L8)
        .map_err(|e| RenderError::Encode(e.to_string()))?;
    Ok(out)
}

fn check_same_size(images: &[GrayImage]) -> Result<(u32, u32), RenderError> {
    let first = images.first().ok_or(RenderError::EmptyInput)?;
    let dims = first.dimensions();
    if images.iter().any(|i| i.dimensions() != dims) {
        return Err(RenderError::SizeMismatch);
    }
    Ok(dims)
}

/// Views tiled row-major, five per row.
pub fn make_contact_sheet(images: &[GrayImage]) -> Result<GrayImage, RenderError> {
    let (w, h) = check_same_size(images)?;
    let cols = images.len().min(5) as u32;
    let rows = images.len().div_ceil(5) as u32;
    let mut sheet = GrayImage::new(w * cols, h * rows);
    for (i, img) in images.iter().enumerate() {
        let (cx, cy) = (i as u32 % 5 * w, i as u32 / 5 * h);
        image::imageops::replace(&mut sheet, img, cx as i64, cy as i64);
    }
    Ok(sheet)
}

/// Frame delay in hundredths of a second (5 frames per second).
pub const GIF_FRAME_DELAY: u16 = 20;

/// Looping animated GIF with one frame per view, gray palette.
pub fn make_gif(images: &[GrayImage]) -> Result<Vec<u8>, RenderError> {
    let (w, h) = check_same_size(images)?;
    let (w, h) = (
        u16::try_from(w).map_err(|_| RenderError::Encode("too wide for GIF".into()))?,
        u16::try_from(h).map_err(|_| RenderError::Encode("too tall for GIF".into()))?,
    );
    let palette: Vec<u8> = (0..=255u8).flat_map(|v| [v, v, v]).collect();
    let mut out = Vec::new();
    {
        let enc_err = |e: gif::EncodingError| RenderError::Encode(e.to_string());
        let mut enc = gif::Encoder::new(&mut out, w, h, &palette).map_err(enc_err)?;
        enc.set_repeat(gif::Repeat::Infinite).map_err(enc_err)?;
        for img in images {
            let frame = gif::Frame {
                width: w,
                height: h,
                delay: GIF_FRAME_DELAY,
                buffer: std::borrow::Cow::Borrowed(img.as_raw()),
                ..gif::Frame::default()
            };
            enc.write_frame(&frame).map_err(enc_err)?;
        }
    }
    Ok(out)
}
