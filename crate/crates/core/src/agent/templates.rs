//! Prompt templates with `{name}` placeholders.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

pub const TEMPLATE_NAMES: [&str; 12] = [
    "preamble",
    "l3go_part_gen",
    "l3go_part_dims",
    "l3go_part_critic",
    "l3go_spatial_gen",
    "l3go_coord",
    "l3go_coord_direct",
    "l3go_shape",
    "l3go_completion",
    "react",
    "reflexion_reflect",
    "single_shot",
];

const BUILTIN: [&str; 12] = [
    include_str!("../../templates/preamble.txt"),
    include_str!("../../templates/l3go_part_gen.txt"),
    include_str!("../../templates/l3go_part_dims.txt"),
    include_str!("../../templates/l3go_part_critic.txt"),
    include_str!("../../templates/l3go_spatial_gen.txt"),
    include_str!("../../templates/l3go_coord.txt"),
    include_str!("../../templates/l3go_coord_direct.txt"),
    include_str!("../../templates/l3go_shape.txt"),
    include_str!("../../templates/l3go_completion.txt"),
    include_str!("../../templates/react.txt"),
    include_str!("../../templates/reflexion_reflect.txt"),
    include_str!("../../templates/single_shot.txt"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    texts: BTreeMap<&'static str, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Templates {
    pub fn builtin() -> Self {
        Templates { texts: TEMPLATE_NAMES.iter().zip(BUILTIN).map(|(&n, t)| (n, t.to_string())).collect() }
    }

    /// Built-in templates overridden by any `<name>.txt` present in `dir`.
    pub fn with_overrides(dir: &Path) -> io::Result<Self> {
        let mut t = Self::builtin();
        for name in TEMPLATE_NAMES {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                t.texts.insert(name, fs::read_to_string(path)?);
            }
        }
        Ok(t)
    }

    pub fn get(&self, name: &str) -> &str {
        self.texts.get(name).map(String::as_str).unwrap_or_else(|| panic!("unknown template '{name}'"))
    }

    /// Substitutes `{key}` occurrences in one pass; unknown keys stay literal.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> String {
        let src = self.get(name);
        let mut out = String::with_capacity(src.len() + 256);
        let mut rest = src;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let key_len = after.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(after.len());
            let value = (after[key_len..].starts_with('}'))
                .then(|| vars.iter().find(|(k, _)| *k == &after[..key_len]))
                .flatten();
            match value {
                Some((_, v)) => {
                    out.push_str(v);
                    rest = &after[key_len + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::sha256_hex;

    #[test]
    fn render_substitutes_once() {
        let t = Templates::builtin();
        let s = t.render("l3go_shape", &[("object", "chair"), ("part", "{object}"), ("dims", "1, 2, 3")]);
        assert!(s.starts_with("Object: chair\n\nPart: {object}\n"));
        assert!(s.contains("(width, depth, height): 1, 2, 3"));
    }

    #[test]
    fn templates_end_with_newline_and_use_known_placeholders() {
        let known = [
            "object", "parts_so_far", "critique", "part", "dims", "feedback", "base", "relation",
            "bindings_doc", "history", "reflection", "action",
        ];
        let t = Templates::builtin();
        for name in TEMPLATE_NAMES {
            let text = t.get(name);
            assert!(text.ends_with('\n'), "{name}");
            let mut rest = text;
            while let Some(i) = rest.find('{') {
                let end = rest[i..].find('}').unwrap() + i;
                let key = &rest[i + 1..end];
                assert!(known.contains(&key), "{name}: {{{key}}}");
                rest = &rest[end..];
            }
        }
    }

    /// Any edit to a template changes recorded prompts, which invalidates
    /// replay fixtures; update these digests together with the fixtures.
    #[test]
    fn golden_digests() {
        let t = Templates::builtin();
        let digests: Vec<String> =
            TEMPLATE_NAMES.iter().map(|n| format!("{n} {}", &sha256_hex(t.get(n).as_bytes())[..16])).collect();
        let expected = include_str!("../../templates/DIGESTS");
        assert_eq!(digests.join("\n") + "\n", expected);
    }
}
