//! Scene file format: parts in scene order with fixed key order and
//! six-decimal numbers.

use serde_json::Value;
use thiserror::Error;

use super::{fmt_fixed, EnvError, SceneState, DEFAULT_TOUCH_EPS};
use crate::geometry::{PrimitiveKind, PrimitiveSpec, Shape, Vec3};

#[derive(Debug, Error)]
pub enum SceneFileError {
    #[error("invalid scene JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scene: {0}")]
    Schema(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

fn num(v: f64) -> String {
    fmt_fixed(v, 6)
}

fn arr(v: Vec3) -> String {
    format!("[{}, {}, {}]", num(v.x), num(v.y), num(v.z))
}

pub fn scene_to_json(state: &SceneState) -> String {
    let mut out = String::from("{\n  \"parts\": [");
    let n = state.len();
    for (i, p) in state.parts().enumerate() {
        let params = p
            .spec
            .shape
            .params()
            .into_iter()
            .map(|(k, v)| format!("\"{k}\": {}", num(v)))
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str("\n    {\n");
        out.push_str(&format!("      \"name\": {},\n", Value::String(p.name.clone())));
        out.push_str(&format!("      \"kind\": \"{}\",\n", p.spec.kind()));
        out.push_str(&format!("      \"params\": {{{params}}},\n"));
        out.push_str(&format!("      \"location\": {},\n", arr(p.spec.location)));
        out.push_str(&format!("      \"scale\": {},\n", arr(p.spec.scale)));
        out.push_str(&format!(
            "      \"aabb\": {{\"min\": {}, \"max\": {}}}\n",
            arr(p.aabb.min),
            arr(p.aabb.max)
        ));
        out.push_str(if i + 1 == n { "    }\n  " } else { "    }," });
    }
    out.push_str("]\n}\n");
    out
}

fn schema(msg: impl Into<String>) -> SceneFileError {
    SceneFileError::Schema(msg.into())
}

fn vec3(v: &Value, what: &str) -> Result<Vec3, SceneFileError> {
    let a = v.as_array().filter(|a| a.len() == 3).ok_or_else(|| schema(format!("{what} must be [x,y,z]")))?;
    let f = |i: usize| a[i].as_f64().ok_or_else(|| schema(format!("{what}[{i}] must be a number")));
    Ok(Vec3::new(f(0)?, f(1)?, f(2)?))
}

/// Reads part specs back from scene JSON, in scene order.
pub fn specs_from_json(text: &str) -> Result<Vec<PrimitiveSpec>, SceneFileError> {
    let root: Value = serde_json::from_str(text)?;
    let parts = root.get("parts").and_then(Value::as_array).ok_or_else(|| schema("missing \"parts\" array"))?;
    parts
        .iter()
        .map(|p| {
            let name = p.get("name").and_then(Value::as_str).ok_or_else(|| schema("part without name"))?;
            let kind_str = p.get("kind").and_then(Value::as_str).ok_or_else(|| schema("part without kind"))?;
            let kind = PrimitiveKind::parse(kind_str).ok_or_else(|| schema(format!("unknown kind '{kind_str}'")))?;
            let params = p.get("params").cloned().unwrap_or(Value::Null);
            let param = |k: &str| {
                params.get(k).and_then(Value::as_f64).ok_or_else(|| schema(format!("{name}: missing param {k}")))
            };
            let shape = match kind {
                PrimitiveKind::Cube => Shape::Cube,
                PrimitiveKind::Cylinder => Shape::Cylinder { radius: param("radius")?, depth: param("depth")? },
                PrimitiveKind::Cone => Shape::Cone {
                    radius_bottom: param("radius_bottom")?,
                    radius_top: param("radius_top")?,
                    depth: param("depth")?,
                },
                PrimitiveKind::Sphere => Shape::Sphere { radius: param("radius")? },
                PrimitiveKind::Torus => Shape::Torus {
                    major_radius: param("major_radius")?,
                    minor_radius: param("minor_radius")?,
                },
            };
            let location = vec3(p.get("location").unwrap_or(&Value::Null), "location")?;
            let scale = match p.get("scale") {
                Some(v) => vec3(v, "scale")?,
                None => Vec3::ONE,
            };
            Ok(PrimitiveSpec { name: name.to_string(), shape, location, scale })
        })
        .collect()
}

pub fn scene_from_json(text: &str) -> Result<SceneState, SceneFileError> {
    let mut state = SceneState::new();
    for spec in specs_from_json(text)? {
        state = state.apply_action(&spec, DEFAULT_TOUCH_EPS)?.0;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_key_order() {
        let seat = PrimitiveSpec::new("seat", Shape::Cube, Vec3::new(0.0, 0.0, 0.5))
            .with_scale(Vec3::new(1.0, 1.0, 0.1));
        let leg = PrimitiveSpec::new("leg", Shape::Cylinder { radius: 0.05, depth: 0.45 }, Vec3::new(0.4, 0.4, 0.225));
        let s = SceneState::new().apply_action(&seat, 1e-3).unwrap().0;
        let s = s.apply_action(&leg, 1e-3).unwrap().0;
        let text = scene_to_json(&s);
        let expected = r#"{
  "parts": [
    {
      "name": "seat",
      "kind": "cube",
      "params": {},
      "location": [0.000000, 0.000000, 0.500000],
      "scale": [1.000000, 1.000000, 0.100000],
      "aabb": {"min": [-0.500000, -0.500000, 0.450000], "max": [0.500000, 0.500000, 0.550000]}
    },
    {
      "name": "leg",
      "kind": "cylinder",
      "params": {"radius": 0.050000, "depth": 0.450000},
      "location": [0.400000, 0.400000, 0.225000],
      "scale": [1.000000, 1.000000, 1.000000],
      "aabb": {"min": [0.350000, 0.350000, 0.000000], "max": [0.450000, 0.450000, 0.450000]}
    }
  ]
}
"#;
        assert_eq!(text, expected);
        let back = specs_from_json(&text).unwrap();
        assert_eq!(back, vec![seat, leg]);
        assert_eq!(scene_to_json(&scene_from_json(&text).unwrap()), text);
    }

    #[test]
    fn empty_scene() {
        let text = scene_to_json(&SceneState::new());
        assert_eq!(text, "{\n  \"parts\": []\n}\n");
        assert!(specs_from_json(&text).unwrap().is_empty());
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(specs_from_json("{}"), Err(SceneFileError::Schema(_))));
        assert!(matches!(
            specs_from_json(r#"{"parts":[{"name":"a","kind":"prism","location":[0,0,0]}]}"#),
            Err(SceneFileError::Schema(_))
        ));
        assert!(matches!(specs_from_json("{"), Err(SceneFileError::Json(_))));
    }
}
