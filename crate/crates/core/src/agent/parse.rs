//! Lenient readers for model replies. Each returns `None` when the reply does
//! not contain the requested answer.

use crate::geometry::{PrimitiveKind, Vec3};

/// Drops markdown emphasis and surrounding quotes from a line.
fn clean(s: &str) -> &str {
    s.trim().trim_matches(|c| matches!(c, '*' | '_' | '`' | '"' | '\'' | '#')).trim()
}

/// Text after the last `TAG:` line, matched case-insensitively.
pub fn tagged(text: &str, tag: &str) -> Option<String> {
    text.lines().rev().find_map(|line| {
        let line = clean(line);
        let head = line.get(..tag.len())?;
        if !head.eq_ignore_ascii_case(tag) {
            return None;
        }
        let rest = clean(&line[tag.len()..]);
        let rest = rest.strip_prefix(':')?;
        Some(clean(rest).to_string())
    })
}

fn single_line(text: &str) -> Option<&str> {
    let mut lines = text.lines().map(clean).filter(|l| !l.is_empty());
    match (lines.next(), lines.next()) {
        (Some(l), None) => Some(l),
        _ => None,
    }
}

pub fn part_name(text: &str) -> Option<String> {
    let raw = tagged(text, "PART").or_else(|| single_line(text).filter(|l| l.len() <= 60).map(str::to_string))?;
    let name = raw.trim_end_matches('.').trim().to_string();
    (name.chars().any(char::is_alphanumeric) && name.len() <= 80).then_some(name)
}

/// Every decimal number in `s`, in order.
pub fn numbers(s: &str) -> Vec<f64> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        if matches!(bytes[i], b'-' | b'+') && i + 1 < bytes.len() && (bytes[i + 1].is_ascii_digit() || bytes[i + 1] == b'.') {
            i += 1;
        }
        let digits_start = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i > digits_start {
            if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
                let mut j = i + 1;
                if j < bytes.len() && matches!(bytes[j], b'-' | b'+') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            if let Ok(v) = s[start..i].parse::<f64>() {
                out.push(v);
            }
        } else {
            i = start + 1;
        }
    }
    out
}

fn triple(s: &str) -> Option<Vec3> {
    let n = numbers(s);
    (n.len() >= 3).then(|| Vec3::new(n[0], n[1], n[2])).filter(|v| v.is_finite())
}

pub fn dims(text: &str) -> Option<Vec3> {
    let line = tagged(text, "DIMS").or_else(|| single_line(text).map(str::to_string))?;
    triple(&line).filter(|d| d.min_element() > 0.0)
}

pub fn center(text: &str) -> Option<Vec3> {
    let line = tagged(text, "CENTER").or_else(|| single_line(text).map(str::to_string))?;
    triple(&line)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Approved,
    Revise(String),
}

pub fn verdict(text: &str) -> Option<Verdict> {
    for line in text.lines().rev() {
        let line = clean(line);
        let upper = line.to_ascii_uppercase();
        if let Some(pos) = upper.find("REVISE") {
            let reason = line[pos + "REVISE".len()..].trim_start_matches([':', ' ', '-']).trim();
            return Some(Verdict::Revise(reason.to_string()));
        }
        if upper.starts_with("APPROVE") {
            return Some(Verdict::Approved);
        }
    }
    None
}

pub fn base_relation(text: &str) -> Option<(String, String)> {
    let base = tagged(text, "BASE")?;
    let relation = tagged(text, "RELATION").unwrap_or_default();
    (!base.is_empty()).then_some((base, relation))
}

/// Body of the first fenced code block, or the whole reply.
pub fn code_block(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.trim().to_string();
    };
    let after = &text[open + 3..];
    let body = match after.find('\n') {
        Some(nl) if !after[..nl].trim().contains(' ') => &after[nl + 1..],
        _ => after,
    };
    match body.find("```") {
        Some(close) => body[..close].trim().to_string(),
        None => body.trim().to_string(),
    }
}

pub fn shape(text: &str) -> Option<PrimitiveKind> {
    let line = tagged(text, "SHAPE").unwrap_or_else(|| text.to_string());
    line.split(|c: char| !c.is_ascii_alphabetic()).find_map(|w| match w.to_ascii_lowercase().as_str() {
        "cube" | "cuboid" | "box" => Some(PrimitiveKind::Cube),
        "cylinder" => Some(PrimitiveKind::Cylinder),
        "cone" | "frustum" => Some(PrimitiveKind::Cone),
        "sphere" | "ball" => Some(PrimitiveKind::Sphere),
        "torus" | "ring" => Some(PrimitiveKind::Torus),
        _ => None,
    })
}

/// `Some(true)` when the object is complete.
pub fn completion(text: &str) -> Option<bool> {
    let line = tagged(text, "COMPLETE").unwrap_or_else(|| text.to_string());
    line.split(|c: char| !c.is_ascii_alphabetic()).find_map(|w| match w.to_ascii_lowercase().as_str() {
        "yes" | "done" | "complete" | "true" => Some(true),
        "no" | "continue" | "incomplete" | "false" => Some(false),
        _ => None,
    })
}

/// Thought text and the action line of a ReAct reply.
pub fn react(text: &str) -> (String, Option<String>) {
    let thought = tagged_first(text, "Thought").unwrap_or_default();
    let action = text.lines().rev().find_map(|line| {
        let t = line.trim().trim_start_matches(['*', '`']);
        let head = t.get(..7)?;
        head.eq_ignore_ascii_case("action:").then(|| t[7..].trim().trim_matches('`').trim().to_string())
    });
    (thought, action)
}

fn tagged_first(text: &str, tag: &str) -> Option<String> {
    text.lines().find_map(|line| {
        let line = clean(line);
        let head = line.get(..tag.len() + 1)?;
        head.eq_ignore_ascii_case(&format!("{tag}:")).then(|| line[tag.len() + 1..].trim().to_string())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Redo,
    MoveOn,
}

pub fn reflection(text: &str) -> (String, Option<Decision>) {
    let reflection = tagged_first(text, "Reflection").unwrap_or_default();
    let decision = tagged(text, "Decision").and_then(|d| {
        let d = d.to_ascii_lowercase();
        if d.contains("redo") {
            Some(Decision::Redo)
        } else if d.contains("move on") || d.contains("move_on") || d.contains("continue") {
            Some(Decision::MoveOn)
        } else {
            None
        }
    });
    (reflection, decision)
}

/// Lowercase identifier form of a part name: "Front right leg" -> "front_right_leg".
pub fn ident(name: &str) -> String {
    let mut out = String::new();
    for c in name.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() {
        return "part".into();
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, "part_");
    }
    out
}
