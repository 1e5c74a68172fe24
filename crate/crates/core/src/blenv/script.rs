//! Line-oriented action scripts:
//!
//! ```text
//! <kind> name=<ident> location=(x,y,z) [scale=(x,y,z)] [radius=r] [radius_bottom=r]
//!        [radius_top=r] [depth=d] [major_radius=r] [minor_radius=r]
//! ```
//!
//! One action per line, `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::geometry::{PrimitiveKind, PrimitiveSpec, Shape, Vec3};

pub type ActionScript = Vec<PrimitiveSpec>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptErrorKind {
    Syntax(String),
    UnknownCommand(String),
    BadNumber(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ScriptError {
    pub line: usize,
    pub kind: ScriptErrorKind,
}

impl fmt::Display for ScriptErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ScriptErrorKind::UnknownCommand(c) => {
                write!(f, "unknown command '{c}' (expected cube, cylinder, cone, sphere or torus)")
            }
            ScriptErrorKind::BadNumber(n) => write!(f, "bad number '{n}'"),
        }
    }
}

pub fn parse_action_script(source: &str) -> Result<ActionScript, ScriptError> {
    match parse_action_script_partial(source) {
        (actions, None) => Ok(actions),
        (_, Some(err)) => Err(err),
    }
}

/// Parses up to the first bad line, returning the actions before it.
pub fn parse_action_script_partial(source: &str) -> (ActionScript, Option<ScriptError>) {
    let mut actions = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(spec) => actions.push(spec),
            Err(kind) => return (actions, Some(ScriptError { line: idx + 1, kind })),
        }
    }
    (actions, None)
}

/// Splits on whitespace outside parentheses.
fn tokens(line: &str) -> Result<Vec<&str>, ScriptErrorKind> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(ScriptErrorKind::Syntax("unbalanced ')'".into()));
                }
            }
            _ => {}
        }
        if c.is_whitespace() && depth == 0 {
            if let Some(s) = start.take() {
                out.push(&line[s..i]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if depth != 0 {
        return Err(ScriptErrorKind::Syntax("unbalanced '('".into()));
    }
    if let Some(s) = start {
        out.push(&line[s..]);
    }
    Ok(out)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn number(s: &str) -> Result<f64, ScriptErrorKind> {
    let t = s.trim();
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    let mut parts = body.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    let digits_ok = int.chars().all(|c| c.is_ascii_digit())
        && frac.is_none_or(|f| f.chars().all(|c| c.is_ascii_digit()))
        && (!int.is_empty() || frac.is_some_and(|f| !f.is_empty()));
    if !digits_ok {
        return Err(ScriptErrorKind::BadNumber(t.to_string()));
    }
    t.parse::<f64>().map_err(|_| ScriptErrorKind::BadNumber(t.to_string()))
}

fn triple(s: &str) -> Result<Vec3, ScriptErrorKind> {
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| ScriptErrorKind::Syntax(format!("expected (x,y,z), got '{s}'")))?;
    let items: Vec<&str> = inner.split(',').collect();
    if items.len() != 3 {
        return Err(ScriptErrorKind::Syntax(format!("expected 3 components, got {}", items.len())));
    }
    Ok(Vec3::new(number(items[0])?, number(items[1])?, number(items[2])?))
}

const SCALAR_KEYS: [&str; 6] = ["radius", "radius_bottom", "radius_top", "depth", "major_radius", "minor_radius"];

fn parse_line(line: &str) -> Result<PrimitiveSpec, ScriptErrorKind> {
    let toks = tokens(line)?;
    let (cmd, args) = toks.split_first().expect("nonempty line");
    let kind = PrimitiveKind::parse(cmd).ok_or_else(|| ScriptErrorKind::UnknownCommand(cmd.to_string()))?;

    let mut name = None;
    let mut location = None;
    let mut scale = None;
    let mut scalars: BTreeMap<&str, f64> = BTreeMap::new();
    for arg in args {
        let (key, value) = arg
            .split_once('=')
            .ok_or_else(|| ScriptErrorKind::Syntax(format!("expected key=value, got '{arg}'")))?;
        let dup = || ScriptErrorKind::Syntax(format!("duplicate argument '{key}'"));
        match key {
            "name" => {
                if !is_ident(value) {
                    return Err(ScriptErrorKind::Syntax(format!("invalid name '{value}'")));
                }
                if name.replace(value.to_string()).is_some() {
                    return Err(dup());
                }
            }
            "location" => {
                if location.replace(triple(value)?).is_some() {
                    return Err(dup());
                }
            }
            "scale" => {
                if scale.replace(triple(value)?).is_some() {
                    return Err(dup());
                }
            }
            k if SCALAR_KEYS.contains(&k) => {
                if scalars.insert(k, number(value)?).is_some() {
                    return Err(dup());
                }
            }
            other => return Err(ScriptErrorKind::Syntax(format!("unknown argument '{other}'"))),
        }
    }
    let name = name.ok_or_else(|| ScriptErrorKind::Syntax("missing name=".into()))?;
    let location = location.ok_or_else(|| ScriptErrorKind::Syntax("missing location=".into()))?;

    let allowed: &[&str] = match kind {
        PrimitiveKind::Cube => &[],
        PrimitiveKind::Cylinder => &["radius", "depth"],
        PrimitiveKind::Cone => &["radius_bottom", "radius_top", "depth"],
        PrimitiveKind::Sphere => &["radius"],
        PrimitiveKind::Torus => &["major_radius", "minor_radius"],
    };
    if let Some(extra) = scalars.keys().find(|k| !allowed.contains(k)) {
        return Err(ScriptErrorKind::Syntax(format!("'{extra}' does not apply to {kind}")));
    }
    let need = |k: &str| {
        scalars
            .get(k)
            .copied()
            .ok_or_else(|| ScriptErrorKind::Syntax(format!("{kind} requires {k}=")))
    };
    let shape = match kind {
        PrimitiveKind::Cube => Shape::Cube,
        PrimitiveKind::Cylinder => Shape::Cylinder { radius: need("radius")?, depth: need("depth")? },
        PrimitiveKind::Cone => Shape::Cone {
            radius_bottom: need("radius_bottom")?,
            radius_top: scalars.get("radius_top").copied().unwrap_or(0.0),
            depth: need("depth")?,
        },
        PrimitiveKind::Sphere => Shape::Sphere { radius: need("radius")? },
        PrimitiveKind::Torus => Shape::Torus {
            major_radius: need("major_radius")?,
            minor_radius: need("minor_radius")?,
        },
    };
    Ok(PrimitiveSpec { name, shape, location, scale: scale.unwrap_or(Vec3::ONE) })
}

/// One script line for `spec`; numbers use the shortest exact decimal form.
pub fn format_action(spec: &PrimitiveSpec) -> String {
    let v = |v: Vec3| format!("({},{},{})", v.x, v.y, v.z);
    let mut line = format!("{} name={} location={}", spec.kind(), spec.name, v(spec.location));
    if spec.scale != Vec3::ONE {
        line.push_str(&format!(" scale={}", v(spec.scale)));
    }
    for (k, val) in spec.shape.params() {
        line.push_str(&format!(" {k}={val}"));
    }
    line
}

pub fn format_script(script: &[PrimitiveSpec]) -> String {
    script.iter().map(|s| format_action(s) + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_cube_line() {
        let s = parse_action_script("cube name=seat location=(0,0,0.5) scale=(1,1,0.1)").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].kind(), PrimitiveKind::Cube);
        assert_eq!(s[0].location, Vec3::new(0.0, 0.0, 0.5));
        assert_eq!(s[0].scale, Vec3::new(1.0, 1.0, 0.1));
    }

    #[test]
    fn empty_and_comments() {
        assert!(parse_action_script("").unwrap().is_empty());
        assert!(parse_action_script("# nothing\n\n   \n").unwrap().is_empty());
        let s = parse_action_script("sphere name=ball location=( 1, -2.5 , +.5 ) radius=0.3 # head\n").unwrap();
        assert_eq!(s[0].location, Vec3::new(1.0, -2.5, 0.5));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_action_script("pyramid name=p location=(0,0,0)").unwrap_err();
        assert_eq!(e, ScriptError { line: 1, kind: ScriptErrorKind::UnknownCommand("pyramid".into()) });

        let e = parse_action_script("cube name=a location=(0,0,0)\ncube name=b location=(1,0,x)").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.kind, ScriptErrorKind::BadNumber("x".into()));

        let e = parse_action_script("cylinder name=a location=(0,0,0) radius=1").unwrap_err();
        assert!(matches!(e.kind, ScriptErrorKind::Syntax(ref m) if m.contains("depth")));

        let e = parse_action_script("cube name=a location=(0,0,0) radius=1").unwrap_err();
        assert!(matches!(e.kind, ScriptErrorKind::Syntax(_)));

        let e = parse_action_script("cube location=(0,0,0)").unwrap_err();
        assert!(matches!(e.kind, ScriptErrorKind::Syntax(ref m) if m.contains("name")));

        for bad in ["1e5", ".", "1.2.3", "--1", ""] {
            assert!(matches!(number(bad), Err(ScriptErrorKind::BadNumber(_))), "{bad}");
        }
    }

    #[test]
    fn partial_parse_keeps_prefix() {
        let (ok, err) = parse_action_script_partial(
            "cube name=a location=(0,0,0)\nbogus line\ncube name=c location=(0,0,0)",
        );
        assert_eq!(ok.len(), 1);
        assert_eq!(err.unwrap().line, 2);
    }

    #[test]
    fn cone_defaults_to_apex() {
        let s = parse_action_script("cone name=c location=(0,0,0) radius_bottom=1 depth=2").unwrap();
        assert_eq!(s[0].shape, Shape::Cone { radius_bottom: 1.0, radius_top: 0.0, depth: 2.0 });
    }

    fn arb_num() -> impl Strategy<Value = f64> {
        prop_oneof![-100.0f64..100.0, (-1000i32..1000).prop_map(|i| f64::from(i) / 8.0)]
    }

    fn arb_pos() -> impl Strategy<Value = f64> {
        prop_oneof![0.001f64..10.0, (1i32..100).prop_map(|i| f64::from(i) / 4.0)]
    }

    fn arb_v3() -> impl Strategy<Value = Vec3> {
        (arb_num(), arb_num(), arb_num()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_shape() -> impl Strategy<Value = Shape> {
        prop_oneof![
            Just(Shape::Cube),
            (arb_pos(), arb_pos()).prop_map(|(radius, depth)| Shape::Cylinder { radius, depth }),
            (arb_pos(), arb_pos(), arb_pos())
                .prop_map(|(radius_bottom, radius_top, depth)| Shape::Cone { radius_bottom, radius_top, depth }),
            arb_pos().prop_map(|radius| Shape::Sphere { radius }),
            (arb_pos(), arb_pos()).prop_map(|(major_radius, minor_radius)| Shape::Torus { major_radius, minor_radius }),
        ]
    }

    fn arb_spec() -> impl Strategy<Value = PrimitiveSpec> {
        ("[a-z_][a-z0-9_]{0,8}", arb_shape(), arb_v3(), prop::option::of(arb_v3())).prop_map(
            |(name, shape, location, scale)| PrimitiveSpec { name, shape, location, scale: scale.unwrap_or(Vec3::ONE) },
        )
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(script in prop::collection::vec(arb_spec(), 0..8)) {
            let text = format_script(&script);
            prop_assert_eq!(parse_action_script(&text).unwrap(), script);
        }
    }
}
