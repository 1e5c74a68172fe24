//! Parametric primitives, their tessellated meshes, exact bounding boxes, and
//! Wavefront OBJ export.
//!
//! Coordinates are Z-up and right-handed. Cylinders and cones stand along +z
//! with their depth centered on the location; the torus lies in the xy-plane.
//! Scale is applied about the primitive's own center before translation.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid primitive spec: {field} {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("duplicate part name '{0}'")]
    DuplicateName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let len = self.length();
        if len == 0.0 {
            self
        } else {
            self * (1.0 / len)
        }
    }

    /// Componentwise product.
    pub fn hadamard(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn max_element(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn min_element(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "({:.p$}, {:.p$}, {:.p$})", self.x, self.y, self.z, p = p),
            None => write!(f, "({}, {}, {})", self.x, self.y, self.z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Aabb { min, max }
    }

    pub fn from_center_half(center: Vec3, half: Vec3) -> Self {
        Aabb::new(center - half, center + half)
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb::new(self.min.min(o.min), self.max.max(o.max))
    }

    /// True when `self` lies inside `outer` with `slack` tolerance on every face.
    pub fn is_within(&self, outer: &Aabb, slack: f64) -> bool {
        (0..3).all(|i| {
            self.min.axis(i) >= outer.min.axis(i) - slack
                && self.max.axis(i) <= outer.max.axis(i) + slack
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Cube,
    Cylinder,
    Cone,
    Sphere,
    Torus,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [
        PrimitiveKind::Cube,
        PrimitiveKind::Cylinder,
        PrimitiveKind::Cone,
        PrimitiveKind::Sphere,
        PrimitiveKind::Torus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::Cube => "cube",
            PrimitiveKind::Cylinder => "cylinder",
            PrimitiveKind::Cone => "cone",
            PrimitiveKind::Sphere => "sphere",
            PrimitiveKind::Torus => "torus",
        }
    }

    pub fn parse(s: &str) -> Option<PrimitiveKind> {
        PrimitiveKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kind-specific parameters of a primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Unit-edge cube; size comes entirely from scale.
    Cube,
    Cylinder { radius: f64, depth: f64 },
    /// `radius_top == 0` is a true cone with an apex.
    Cone { radius_bottom: f64, radius_top: f64, depth: f64 },
    Sphere { radius: f64 },
    Torus { major_radius: f64, minor_radius: f64 },
}

impl Shape {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Shape::Cube => PrimitiveKind::Cube,
            Shape::Cylinder { .. } => PrimitiveKind::Cylinder,
            Shape::Cone { .. } => PrimitiveKind::Cone,
            Shape::Sphere { .. } => PrimitiveKind::Sphere,
            Shape::Torus { .. } => PrimitiveKind::Torus,
        }
    }

    /// Named parameters in canonical order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Shape::Cube => vec![],
            Shape::Cylinder { radius, depth } => vec![("radius", radius), ("depth", depth)],
            Shape::Cone { radius_bottom, radius_top, depth } => vec![
                ("radius_bottom", radius_bottom),
                ("radius_top", radius_top),
                ("depth", depth),
            ],
            Shape::Sphere { radius } => vec![("radius", radius)],
            Shape::Torus { major_radius, minor_radius } => {
                vec![("major_radius", major_radius), ("minor_radius", minor_radius)]
            }
        }
    }

    /// Half extents of the unscaled ideal solid.
    fn half_extents(&self) -> Vec3 {
        match *self {
            Shape::Cube => Vec3::splat(0.5),
            Shape::Cylinder { radius, depth } => Vec3::new(radius, radius, depth / 2.0),
            Shape::Cone { radius_bottom, radius_top, depth } => {
                let r = radius_bottom.max(radius_top);
                Vec3::new(r, r, depth / 2.0)
            }
            Shape::Sphere { radius } => Vec3::splat(radius),
            Shape::Torus { major_radius, minor_radius } => {
                let r = major_radius + minor_radius;
                Vec3::new(r, r, minor_radius)
            }
        }
    }
}

/// One placed primitive: the unit of the construction action space.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSpec {
    pub name: String,
    pub shape: Shape,
    pub location: Vec3,
    pub scale: Vec3,
}

fn check_positive(field: &'static str, v: f64) -> Result<(), GeometryError> {
    if !v.is_finite() {
        return Err(GeometryError::InvalidSpec { field, reason: format!("must be finite, got {v}") });
    }
    if v <= 0.0 {
        return Err(GeometryError::InvalidSpec { field, reason: format!("must be > 0, got {v}") });
    }
    Ok(())
}

impl PrimitiveSpec {
    pub fn new(name: impl Into<String>, shape: Shape, location: Vec3) -> Self {
        PrimitiveSpec { name: name.into(), shape, location, scale: Vec3::ONE }
    }

    pub fn with_scale(mut self, scale: Vec3) -> Self {
        self.scale = scale;
        self
    }

    pub fn kind(&self) -> PrimitiveKind {
        self.shape.kind()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.name.trim().is_empty() {
            return Err(GeometryError::InvalidSpec { field: "name", reason: "must be nonempty".into() });
        }
        if !self.location.is_finite() {
            return Err(GeometryError::InvalidSpec {
                field: "location",
                reason: "components must be finite".into(),
            });
        }
        check_positive("scale.x", self.scale.x)?;
        check_positive("scale.y", self.scale.y)?;
        check_positive("scale.z", self.scale.z)?;
        match self.shape {
            Shape::Cube => {}
            Shape::Cylinder { radius, depth } => {
                check_positive("radius", radius)?;
                check_positive("depth", depth)?;
            }
            Shape::Cone { radius_bottom, radius_top, depth } => {
                check_positive("radius_bottom", radius_bottom)?;
                check_positive("depth", depth)?;
                if !(radius_top.is_finite() && radius_top >= 0.0) {
                    return Err(GeometryError::InvalidSpec {
                        field: "radius_top",
                        reason: format!("must be >= 0, got {radius_top}"),
                    });
                }
            }
            Shape::Sphere { radius } => check_positive("radius", radius)?,
            Shape::Torus { major_radius, minor_radius } => {
                check_positive("major_radius", major_radius)?;
                check_positive("minor_radius", minor_radius)?;
                if minor_radius >= major_radius {
                    return Err(GeometryError::InvalidSpec {
                        field: "minor_radius",
                        reason: format!("must be < major_radius ({major_radius}), got {minor_radius}"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tessellation {
    pub segments: u32,
    /// Latitude bands of the UV sphere.
    pub rings: u32,
}

impl Default for Tessellation {
    fn default() -> Self {
        Tessellation { segments: 32, rings: 16 }
    }
}

impl Tessellation {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.segments < 3 {
            return Err(GeometryError::InvalidSpec {
                field: "segments",
                reason: format!("must be >= 3, got {}", self.segments),
            });
        }
        if self.rings < 2 {
            return Err(GeometryError::InvalidSpec {
                field: "rings",
                reason: format!("must be >= 2, got {}", self.rings),
            });
        }
        Ok(())
    }
}

/// Indexed triangle mesh with outward (counter-clockwise) winding.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    fn push(&mut self, v: Vec3) -> u32 {
        self.vertices.push(v);
        (self.vertices.len() - 1) as u32
    }

    fn tri(&mut self, a: u32, b: u32, c: u32) {
        self.triangles.push([a, b, c]);
    }

    fn quad(&mut self, a: u32, b: u32, c: u32, d: u32) {
        self.tri(a, b, c);
        self.tri(a, c, d);
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = HashSet::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Signed volume by the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }
}

/// Unit circle sample `k` of `n`, starting on +x and turning counter-clockwise.
fn ring_dir(k: u32, n: u32) -> (f64, f64) {
    let a = 2.0 * PI * f64::from(k) / f64::from(n);
    (a.cos(), a.sin())
}

/// Tessellates `spec` around the origin, then scales and translates it.
pub fn generate_primitive(spec: &PrimitiveSpec, tess: &Tessellation) -> Result<Mesh, GeometryError> {
    spec.validate()?;
    tess.validate()?;
    let n = tess.segments;
    let mut mesh = Mesh::default();
    match spec.shape {
        Shape::Cube => {
            for &z in &[-0.5, 0.5] {
                for &(x, y) in &[(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)] {
                    mesh.push(Vec3::new(x, y, z));
                }
            }
            mesh.quad(0, 3, 2, 1); // bottom
            mesh.quad(4, 5, 6, 7); // top
            mesh.quad(0, 1, 5, 4); // -y
            mesh.quad(1, 2, 6, 5); // +x
            mesh.quad(2, 3, 7, 6); // +y
            mesh.quad(3, 0, 4, 7); // -x
        }
        Shape::Cylinder { radius, depth } => {
            frustum(&mut mesh, n, radius, radius, depth);
        }
        Shape::Cone { radius_bottom, radius_top, depth } => {
            frustum(&mut mesh, n, radius_bottom, radius_top, depth);
        }
        Shape::Sphere { radius } => {
            let rings = tess.rings;
            let south = mesh.push(Vec3::new(0.0, 0.0, -radius));
            for i in 1..rings {
                let phi = PI * f64::from(i) / f64::from(rings);
                let (rho, z) = (radius * phi.sin(), -radius * phi.cos());
                for k in 0..n {
                    let (c, s) = ring_dir(k, n);
                    mesh.push(Vec3::new(rho * c, rho * s, z));
                }
            }
            let north = mesh.push(Vec3::new(0.0, 0.0, radius));
            let at = |i: u32, k: u32| 1 + i * n + (k % n);
            for k in 0..n {
                mesh.tri(south, at(0, k + 1), at(0, k));
            }
            for i in 0..rings - 2 {
                for k in 0..n {
                    mesh.quad(at(i, k), at(i, k + 1), at(i + 1, k + 1), at(i + 1, k));
                }
            }
            let top = rings - 2;
            for k in 0..n {
                mesh.tri(north, at(top, k), at(top, k + 1));
            }
        }
        Shape::Torus { major_radius, minor_radius } => {
            // Minor circles use the same segment count as the major sweep.
            let m = n;
            for k in 0..n {
                let (c, s) = ring_dir(k, n);
                for j in 0..m {
                    let (cj, sj) = ring_dir(j, m);
                    let rho = major_radius + minor_radius * cj;
                    mesh.push(Vec3::new(rho * c, rho * s, minor_radius * sj));
                }
            }
            let at = |k: u32, j: u32| (k % n) * m + (j % m);
            for k in 0..n {
                for j in 0..m {
                    mesh.quad(at(k, j), at(k + 1, j), at(k + 1, j + 1), at(k, j + 1));
                }
            }
        }
    }
    for v in &mut mesh.vertices {
        *v = v.hadamard(spec.scale) + spec.location;
    }
    Ok(mesh)
}

/// Capped frustum along z; collapses the top ring to an apex when `top == 0`.
fn frustum(mesh: &mut Mesh, n: u32, bottom: f64, top: f64, depth: f64) {
    let h = depth / 2.0;
    let bottom_center = mesh.push(Vec3::new(0.0, 0.0, -h));
    for k in 0..n {
        let (c, s) = ring_dir(k, n);
        mesh.push(Vec3::new(bottom * c, bottom * s, -h));
    }
    let b = |k: u32| 1 + (k % n);
    for k in 0..n {
        mesh.tri(bottom_center, b(k + 1), b(k));
    }
    if top == 0.0 {
        let apex = mesh.push(Vec3::new(0.0, 0.0, h));
        for k in 0..n {
            mesh.tri(b(k), b(k + 1), apex);
        }
        return;
    }
    let first_top = mesh.vertices.len() as u32;
    for k in 0..n {
        let (c, s) = ring_dir(k, n);
        mesh.push(Vec3::new(top * c, top * s, h));
    }
    let t = |k: u32| first_top + (k % n);
    let top_center = mesh.push(Vec3::new(0.0, 0.0, h));
    for k in 0..n {
        mesh.quad(b(k), b(k + 1), t(k + 1), t(k));
        mesh.tri(top_center, t(k), t(k + 1));
    }
}

/// Exact box of the ideal solid after scale and translation.
pub fn analytic_aabb(spec: &PrimitiveSpec) -> Result<Aabb, GeometryError> {
    spec.validate()?;
    Ok(Aabb::from_center_half(spec.location, spec.shape.half_extents().hadamard(spec.scale)))
}

pub fn mesh_aabb(mesh: &Mesh) -> Result<Aabb, GeometryError> {
    let first = *mesh.vertices.first().ok_or(GeometryError::EmptyMesh)?;
    let (min, max) = mesh
        .vertices
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(Aabb::new(min, max))
}

/// Writes named meshes as Wavefront OBJ with 1-based face indices.
pub fn export_obj<S: AsRef<str>>(scene_meshes: &[(S, Mesh)]) -> Result<Vec<u8>, GeometryError> {
    let mut seen = HashSet::new();
    for (name, _) in scene_meshes {
        if !seen.insert(name.as_ref()) {
            return Err(GeometryError::DuplicateName(name.as_ref().to_string()));
        }
    }
    let mut out = String::from("# l3go scene export\n");
    let mut offset = 1usize;
    for (name, mesh) in scene_meshes {
        writeln!(out, "o {}", name.as_ref()).unwrap();
        for v in &mesh.vertices {
            writeln!(out, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z).unwrap();
        }
        for t in &mesh.triangles {
            writeln!(
                out,
                "f {} {} {}",
                t[0] as usize + offset,
                t[1] as usize + offset,
                t[2] as usize + offset
            )
            .unwrap();
        }
        offset += mesh.vertices.len();
    }
    Ok(out.into_bytes())
}
