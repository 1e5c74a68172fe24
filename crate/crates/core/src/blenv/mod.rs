//! The construction environment: a value-typed scene of named primitive parts,
//! the create/remove actions, and the bounding-box spatial checks whose results
//! are fed back to agents as text.

mod script;
mod spatial;
pub mod scene_json;

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{analytic_aabb, Aabb, GeometryError, PrimitiveSpec, Vec3};

pub use script::{format_action, format_script, parse_action_script, parse_action_script_partial, ActionScript, ScriptError, ScriptErrorKind};
pub use spatial::{classify_spatial, contact_graph_connected, min_gap, relate, BoxRelation, CONTAINMENT_SLACK};

/// Default clearance below which two parts count as touching.
pub const DEFAULT_TOUCH_EPS: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("a part named '{0}' already exists")]
    DuplicateName(String),
    #[error("no part named '{0}'")]
    UnknownPart(String),
    #[error(transparent)]
    InvalidSpec(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartRecord {
    pub name: String,
    pub spec: PrimitiveSpec,
    pub aabb: Aabb,
    pub dims: Vec3,
    pub created_at: usize,
}

/// Ordered list of placed parts. Cloning is cheap; every operation returns a
/// new state and leaves the receiver untouched.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneState {
    parts: Vec<Arc<PartRecord>>,
    next_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpatialFlag {
    TotalContainment,
    Disconnected,
}

impl SpatialFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SpatialFlag::TotalContainment => "TotalContainment",
            SpatialFlag::Disconnected => "Disconnected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialReport {
    pub new_part: String,
    pub new_aabb: Aabb,
    pub flags: BTreeSet<SpatialFlag>,
    /// The existing part that fully encloses the new one.
    pub contained_in: Option<String>,
    /// Nearest existing part and its clearance; present iff `Disconnected`.
    pub nearest_gap: Option<(String, f64)>,
    /// Existing parts sharing positive volume with the new part without enclosing it.
    pub overlapping_with: Vec<String>,
    pub summary_text: String,
}

impl SpatialReport {
    pub fn is_clean(&self) -> bool {
        self.flags.is_empty()
    }
}

impl SceneState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parts(&self) -> impl ExactSizeIterator<Item = &PartRecord> + '_ {
        self.parts.iter().map(|p| p.as_ref())
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn next_step(&self) -> usize {
        self.next_step
    }

    pub fn get(&self, name: &str) -> Option<&PartRecord> {
        self.parts.iter().find(|p| p.name == name).map(|p| p.as_ref())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Union box of all parts, `None` for an empty scene.
    pub fn bounds(&self) -> Option<Aabb> {
        self.parts().map(|p| p.aabb).reduce(|a, b| a.union(&b))
    }

    pub fn specs(&self) -> Vec<PrimitiveSpec> {
        self.parts().map(|p| p.spec.clone()).collect()
    }

    /// Places a new part and checks it against every prior part.
    pub fn apply_action(
        &self,
        spec: &PrimitiveSpec,
        touch_eps: f64,
    ) -> Result<(SceneState, SpatialReport), EnvError> {
        if self.contains(&spec.name) {
            return Err(EnvError::DuplicateName(spec.name.clone()));
        }
        let aabb = analytic_aabb(spec)?;
        let existing: Vec<(&str, Aabb)> = self.parts().map(|p| (p.name.as_str(), p.aabb)).collect();
        let report = classify_spatial(&spec.name, aabb, &existing, touch_eps);
        let record = PartRecord {
            name: spec.name.clone(),
            spec: spec.clone(),
            aabb,
            dims: aabb.size(),
            created_at: self.next_step,
        };
        let mut parts = self.parts.clone();
        parts.push(Arc::new(record));
        Ok((SceneState { parts, next_step: self.next_step + 1 }, report))
    }

    pub fn remove_part(&self, name: &str) -> Result<SceneState, EnvError> {
        let idx = self
            .parts
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| EnvError::UnknownPart(name.to_string()))?;
        let mut parts = self.parts.clone();
        parts.remove(idx);
        Ok(SceneState { parts, next_step: self.next_step })
    }

    /// True when the parts form one component under `min_gap <= touch_eps`.
    pub fn is_connected(&self, touch_eps: f64) -> bool {
        let boxes: Vec<Aabb> = self.parts().map(|p| p.aabb).collect();
        contact_graph_connected(&boxes, touch_eps)
    }

    /// Names of parts whose box lies inside another part's box.
    pub fn contained_parts(&self) -> Vec<String> {
        let parts: Vec<&PartRecord> = self.parts().collect();
        parts
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                parts.iter().enumerate().any(|(j, q)| *i != j && p.aabb.is_within(&q.aabb, CONTAINMENT_SLACK))
            })
            .map(|(_, p)| p.name.clone())
            .collect()
    }
}

/// Fixed-precision number with negative zero folded to zero.
pub(crate) fn fmt_fixed(v: f64, decimals: usize) -> String {
    let s = format!("{:.*}", decimals, v);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn fmt_vec3(v: Vec3) -> String {
    format!("({}, {}, {})", fmt_fixed(v.x, 3), fmt_fixed(v.y, 3), fmt_fixed(v.z, 3))
}

fn box_line(b: &Aabb) -> String {
    format!("min {}, max {}, size {}", fmt_vec3(b.min), fmt_vec3(b.max), fmt_vec3(b.size()))
}

/// Renders a report as the text message relayed to the agent.
pub fn feedback_text(report: &SpatialReport, state: &SceneState) -> String {
    let name = &report.new_part;
    let mut out = String::new();
    if report.is_clean() {
        out.push_str(&format!("Part '{name}' created successfully.\n"));
    } else {
        out.push_str(&format!("Part '{name}' was created, but the spatial check found problems.\n"));
    }
    out.push_str(&format!("Bounding box of '{name}': {}.\n", box_line(&report.new_aabb)));
    let others: Vec<&PartRecord> = state.parts().filter(|p| &p.name != name).collect();
    if others.is_empty() {
        out.push_str("Existing parts: none.\n");
    } else {
        out.push_str("Existing parts:\n");
        for p in others {
            out.push_str(&format!("- '{}': {}\n", p.name, box_line(&p.aabb)));
        }
    }
    if report.flags.contains(&SpatialFlag::TotalContainment) {
        let host = report.contained_in.as_deref().unwrap_or("?");
        out.push_str(&format!(
            "Warning: part '{name}' is entirely contained within part '{host}'. \
             Move or resize it so that it extends outside '{host}'.\n"
        ));
    }
    if let Some((other, gap)) = &report.nearest_gap {
        out.push_str(&format!(
            "Warning: part '{name}' is disconnected from the object; there is a gap of {} to part '{other}'. \
             Place it so that it touches an existing part.\n",
            fmt_fixed(*gap, 3)
        ));
    }
    for other in &report.overlapping_with {
        out.push_str(&format!("Note: part '{name}' partially overlaps part '{other}'.\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    fn cube(name: &str, at: Vec3, scale: f64) -> PrimitiveSpec {
        PrimitiveSpec::new(name, Shape::Cube, at).with_scale(Vec3::splat(scale))
    }

    #[test]
    fn first_part_is_exempt() {
        let s = SceneState::new();
        let (s1, r) = s.apply_action(&cube("a", Vec3::ZERO, 1.0), DEFAULT_TOUCH_EPS).unwrap();
        assert_eq!(s1.len(), 1);
        assert!(r.flags.is_empty());
        assert!(s.is_empty(), "input state must not change");
        assert_eq!(s1.next_step(), 1);
    }

    #[test]
    fn small_cube_inside_cylinder_is_contained() {
        let cyl = PrimitiveSpec::new("base", Shape::Cylinder { radius: 1.0, depth: 2.0 }, Vec3::ZERO);
        let (s, _) = SceneState::new().apply_action(&cyl, DEFAULT_TOUCH_EPS).unwrap();
        let (_, r) = s.apply_action(&cube("box", Vec3::ZERO, 0.2), DEFAULT_TOUCH_EPS).unwrap();
        assert_eq!(r.flags, BTreeSet::from([SpatialFlag::TotalContainment]));
        assert_eq!(r.contained_in.as_deref(), Some("base"));
        assert!(r.nearest_gap.is_none());
    }

    #[test]
    fn distant_cube_is_disconnected() {
        let (s, _) = SceneState::new().apply_action(&cube("a", Vec3::ZERO, 1.0), DEFAULT_TOUCH_EPS).unwrap();
        let (_, r) = s.apply_action(&cube("b", Vec3::new(5.0, 0.0, 0.0), 1.0), DEFAULT_TOUCH_EPS).unwrap();
        assert_eq!(r.flags, BTreeSet::from([SpatialFlag::Disconnected]));
        let (other, gap) = r.nearest_gap.unwrap();
        assert_eq!(other, "a");
        assert!((gap - 4.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_and_invalid_actions() {
        let (s, _) = SceneState::new().apply_action(&cube("a", Vec3::ZERO, 1.0), DEFAULT_TOUCH_EPS).unwrap();
        assert_eq!(
            s.apply_action(&cube("a", Vec3::ZERO, 1.0), DEFAULT_TOUCH_EPS).unwrap_err(),
            EnvError::DuplicateName("a".into())
        );
        let bad = PrimitiveSpec::new("r", Shape::Sphere { radius: -1.0 }, Vec3::ZERO);
        assert!(matches!(s.apply_action(&bad, DEFAULT_TOUCH_EPS), Err(EnvError::InvalidSpec(_))));
    }

    #[test]
    fn remove_part_behaviour() {
        let spec = cube("a", Vec3::ZERO, 1.0);
        let (s, _) = SceneState::new().apply_action(&spec, DEFAULT_TOUCH_EPS).unwrap();
        let empty = s.remove_part("a").unwrap();
        assert!(empty.is_empty());
        let (again, _) = empty.apply_action(&spec, DEFAULT_TOUCH_EPS).unwrap();
        let boxes = |st: &SceneState| st.parts().map(|p| p.aabb).collect::<Vec<_>>();
        assert_eq!(boxes(&again), boxes(&s));
        assert_eq!(s.remove_part("legX").unwrap_err(), EnvError::UnknownPart("legX".into()));
    }

    #[test]
    fn feedback_golden_clean() {
        let seat = cube("seat", Vec3::ZERO, 1.0);
        let (s, r) = SceneState::new().apply_action(&seat, DEFAULT_TOUCH_EPS).unwrap();
        let text = feedback_text(&r, &s);
        assert_eq!(
            text,
            "Part 'seat' created successfully.\n\
             Bounding box of 'seat': min (-0.500, -0.500, -0.500), max (0.500, 0.500, 0.500), size (1.000, 1.000, 1.000).\n\
             Existing parts: none.\n"
        );
    }

    #[test]
    fn feedback_golden_flags() {
        let (s, _) = SceneState::new().apply_action(&cube("seat", Vec3::ZERO, 1.0), DEFAULT_TOUCH_EPS).unwrap();
        let (s2, r) = s
            .apply_action(&cube("leg", Vec3::new(1.4, 0.0, 0.0), 1.0), DEFAULT_TOUCH_EPS)
            .unwrap();
        let text = feedback_text(&r, &s2);
        assert_eq!(
            text,
            "Part 'leg' was created, but the spatial check found problems.\n\
             Bounding box of 'leg': min (0.900, -0.500, -0.500), max (1.900, 0.500, 0.500), size (1.000, 1.000, 1.000).\n\
             Existing parts:\n\
             - 'seat': min (-0.500, -0.500, -0.500), max (0.500, 0.500, 0.500), size (1.000, 1.000, 1.000)\n\
             Warning: part 'leg' is disconnected from the object; there is a gap of 0.400 to part 'seat'. \
             Place it so that it touches an existing part.\n"
        );
        assert!(!text.contains("created successfully"));

        let (s3, r) = s.apply_action(&cube("pip", Vec3::ZERO, 0.5), DEFAULT_TOUCH_EPS).unwrap();
        let text = feedback_text(&r, &s3);
        assert!(text.contains("entirely contained within part 'seat'"));

        let (s4, r) = s
            .apply_action(&cube("half", Vec3::new(0.5, 0.0, 0.0), 1.0), DEFAULT_TOUCH_EPS)
            .unwrap();
        assert!(r.is_clean());
        assert!(feedback_text(&r, &s4).contains("Note: part 'half' partially overlaps part 'seat'."));
    }

    #[test]
    fn negative_zero_is_printed_as_zero() {
        assert_eq!(fmt_fixed(-0.0001, 3), "0.000");
        assert_eq!(fmt_fixed(-0.0006, 3), "-0.001");
        assert_eq!(fmt_fixed(-0.0, 6), "0.000000");
    }

    #[test]
    fn contained_parts_lists_inner_boxes() {
        let (s, _) = SceneState::new().apply_action(&cube("a", Vec3::ZERO, 2.0), DEFAULT_TOUCH_EPS).unwrap();
        let (s, _) = s.apply_action(&cube("b", Vec3::ZERO, 1.0), DEFAULT_TOUCH_EPS).unwrap();
        assert_eq!(s.contained_parts(), vec!["b".to_string()]);
        assert!(s.is_connected(DEFAULT_TOUCH_EPS));
    }
}
