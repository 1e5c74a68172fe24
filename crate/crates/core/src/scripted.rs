//! Built-in scripted model policies.
//!
//! The `builder` policy reads the prompt the agents send, looks the object up
//! in a small recipe book, and answers as a well-behaved model would. The
//! other policies are variants with one deliberate fault each, used to drive
//! the critic, parse-error and abort paths deterministically.

use std::sync::Arc;

use crate::agent::parse::ident;
use crate::agent::spec_from_dims;
use crate::blenv::{format_script, format_action, SceneState};
use crate::dsl::{eval_program, parse_program, Bindings, NAMESPACE};
use crate::gateway::{ChatRequest, ExchangeKey, GatewayError, ScriptedBackend, Transport};
use crate::geometry::{analytic_aabb, PrimitiveKind, PrimitiveSpec, Vec3};

pub const POLICY_NAMES: [&str; 6] = ["builder", "faulty-leg", "react-typo", "reflexion-redo", "garbled", "always-error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// All coordinate samples for the chair's front right leg float below the
    /// seat until the spatial critic has complained once.
    FaultyLeg,
    /// The first ReAct action has a malformed number.
    ReactTypo,
    /// The second ReAct part is placed floating until a reflection asks to redo it.
    ReflexionRedo,
    Garbled,
    AlwaysError,
}

pub fn named_policy(name: &str) -> Option<Arc<dyn Transport>> {
    let fault = match name {
        "builder" => Fault::None,
        "faulty-leg" => Fault::FaultyLeg,
        "react-typo" => Fault::ReactTypo,
        "reflexion-redo" => Fault::ReflexionRedo,
        "garbled" => Fault::Garbled,
        "always-error" => Fault::AlwaysError,
        _ => return None,
    };
    let builder = Builder { fault };
    Some(Arc::new(ScriptedBackend::new(move |req, key| builder.reply(req, key))))
}

/// Judge that names `answer` whenever it is shown images.
pub fn oracle_judge(answer: &str) -> Arc<dyn Transport> {
    let answer = answer.to_string();
    Arc::new(ScriptedBackend::new(move |req, _| {
        if req.messages.iter().any(|m| !m.images.is_empty()) {
            Ok(answer.clone())
        } else {
            Ok("I am not sure.".into())
        }
    }))
}

struct RecipePart {
    name: &'static str,
    /// Ambiguous first proposal, corrected after critique.
    draft: Option<&'static str>,
    shape: PrimitiveKind,
    dims: [f64; 3],
    base: &'static str,
    relation: &'static str,
    program: &'static str,
}

struct Recipe {
    keywords: &'static [&'static str],
    parts: &'static [RecipePart],
}

use PrimitiveKind::{Cone, Cube, Cylinder, Sphere};

const fn p(
    name: &'static str,
    shape: PrimitiveKind,
    dims: [f64; 3],
    base: &'static str,
    relation: &'static str,
    program: &'static str,
) -> RecipePart {
    RecipePart { name, draft: None, shape, dims, base, relation, program }
}

const ORIGIN: &str = "x = 0; y = 0; z = 0";
const ON_TOP: &str = "x = base.center.x; y = base.center.y; z = base.max.z + part.size.z / 2";
const ON_TOP_BACK: &str = "x = base.center.x; y = base.min.y + part.size.y / 2; z = base.max.z + part.size.z / 2";
const BELOW: &str = "x = base.center.x; y = base.center.y; z = base.min.z - part.size.z / 2";
const FR_BELOW: &str =
    "x = base.max.x - part.size.x / 2; y = base.max.y - part.size.y / 2; z = base.min.z - part.size.z / 2";
const FL_BELOW: &str =
    "x = base.min.x + part.size.x / 2; y = base.max.y - part.size.y / 2; z = base.min.z - part.size.z / 2";
const BL_BELOW: &str =
    "x = base.min.x + part.size.x / 2; y = base.min.y + part.size.y / 2; z = base.min.z - part.size.z / 2";
const BR_BELOW: &str =
    "x = base.max.x - part.size.x / 2; y = base.min.y + part.size.y / 2; z = base.min.z - part.size.z / 2";
const LEFT_SIDE: &str = "x = base.min.x - part.size.x / 2; y = base.center.y; z = base.center.z";
const RIGHT_SIDE: &str = "x = base.max.x + part.size.x / 2; y = base.center.y; z = base.center.z";

const FIRST: &str = "";

static RECIPES: &[Recipe] = &[
    Recipe {
        keywords: &["chair"],
        parts: &[
            p("seat", Cube, [0.5, 0.5, 0.05], FIRST, "", ORIGIN),
            RecipePart {
                name: "front right leg",
                draft: Some("leg"),
                shape: Cylinder,
                dims: [0.05, 0.05, 0.45],
                base: "seat",
                relation: "directly below the front right corner of the seat, touching its bottom face",
                program: FR_BELOW,
            },
            p("front left leg", Cylinder, [0.05, 0.05, 0.45], "seat",
              "directly below the front left corner of the seat, touching its bottom face", FL_BELOW),
            p("back left leg", Cylinder, [0.05, 0.05, 0.45], "seat",
              "directly below the back left corner of the seat, touching its bottom face", BL_BELOW),
            p("back right leg", Cylinder, [0.05, 0.05, 0.45], "seat",
              "directly below the back right corner of the seat, touching its bottom face", BR_BELOW),
            p("backrest", Cube, [0.5, 0.05, 0.5], "seat",
              "standing on the back edge of the seat's top face", ON_TOP_BACK),
        ],
    },
    Recipe {
        keywords: &["table", "desk"],
        parts: &[
            p("tabletop", Cube, [1.2, 0.8, 0.05], FIRST, "", ORIGIN),
            p("front left leg", Cube, [0.06, 0.06, 0.7], "tabletop",
              "below the front left corner of the tabletop, touching its bottom face", FL_BELOW),
            p("front right leg", Cube, [0.06, 0.06, 0.7], "tabletop",
              "below the front right corner of the tabletop, touching its bottom face", FR_BELOW),
            p("back left leg", Cube, [0.06, 0.06, 0.7], "tabletop",
              "below the back left corner of the tabletop, touching its bottom face", BL_BELOW),
            p("back right leg", Cube, [0.06, 0.06, 0.7], "tabletop",
              "below the back right corner of the tabletop, touching its bottom face", BR_BELOW),
        ],
    },
    Recipe {
        keywords: &["airplane", "aeroplane", "plane", "jet"],
        parts: &[
            p("fuselage", Cube, [0.3, 2.0, 0.3], FIRST, "", ORIGIN),
            p("left wing", Cube, [1.2, 0.5, 0.05], "fuselage",
              "attached to the middle of the fuselage's left side", LEFT_SIDE),
            p("right wing", Cube, [1.2, 0.5, 0.05], "fuselage",
              "attached to the middle of the fuselage's right side", RIGHT_SIDE),
            p("tail fin", Cube, [0.05, 0.3, 0.4], "fuselage",
              "standing on top of the fuselage at its back end", ON_TOP_BACK),
            p("horizontal stabilizer", Cube, [0.8, 0.25, 0.04], "fuselage",
              "passing through the back end of the fuselage at mid height",
              "x = base.center.x; y = base.min.y + part.size.y / 2; z = base.center.z"),
        ],
    },
    Recipe {
        keywords: &["bench"],
        parts: &[
            p("seat", Cube, [1.4, 0.4, 0.05], FIRST, "", ORIGIN),
            p("left support", Cube, [0.05, 0.4, 0.4], "seat", "below the left end of the seat",
              "x = base.min.x + part.size.x / 2; y = base.center.y; z = base.min.z - part.size.z / 2"),
            p("right support", Cube, [0.05, 0.4, 0.4], "seat", "below the right end of the seat",
              "x = base.max.x - part.size.x / 2; y = base.center.y; z = base.min.z - part.size.z / 2"),
            p("backrest", Cube, [1.4, 0.05, 0.35], "seat", "on the back edge of the seat", ON_TOP_BACK),
        ],
    },
    Recipe {
        keywords: &["cabinet", "cupboard", "wardrobe"],
        parts: &[
            p("body", Cube, [0.8, 0.5, 1.6], FIRST, "", ORIGIN),
            p("left door", Cube, [0.39, 0.02, 1.5], "body", "covering the left half of the body's front face",
              "x = base.center.x - part.size.x / 2 - 0.005; y = base.max.y + part.size.y / 2; z = base.center.z"),
            p("right door", Cube, [0.39, 0.02, 1.5], "body", "covering the right half of the body's front face",
              "x = base.center.x + part.size.x / 2 + 0.005; y = base.max.y + part.size.y / 2; z = base.center.z"),
            p("left door handle", Cylinder, [0.02, 0.02, 0.15], "left door",
              "on the front of the left door near its right edge",
              "x = base.max.x - 0.05; y = base.max.y + part.size.y / 2; z = base.center.z"),
            p("right door handle", Cylinder, [0.02, 0.02, 0.15], "right door",
              "on the front of the right door near its left edge",
              "x = base.min.x + 0.05; y = base.max.y + part.size.y / 2; z = base.center.z"),
        ],
    },
    Recipe {
        keywords: &["car", "automobile"],
        parts: &[
            p("body", Cube, [1.8, 4.2, 0.6], FIRST, "", ORIGIN),
            p("cabin", Cube, [1.6, 2.0, 0.5], "body", "on top of the body, slightly toward the back",
              "x = base.center.x; y = base.center.y - 0.3; z = base.max.z + part.size.z / 2"),
            p("front left wheel", Sphere, [0.25, 0.7, 0.7], "body", "against the left side of the body near the front",
              "x = base.min.x - part.size.x / 2; y = base.max.y - 0.9; z = base.min.z + 0.1"),
            p("front right wheel", Sphere, [0.25, 0.7, 0.7], "body", "against the right side of the body near the front",
              "x = base.max.x + part.size.x / 2; y = base.max.y - 0.9; z = base.min.z + 0.1"),
            p("back left wheel", Sphere, [0.25, 0.7, 0.7], "body", "against the left side of the body near the back",
              "x = base.min.x - part.size.x / 2; y = base.min.y + 0.9; z = base.min.z + 0.1"),
            p("back right wheel", Sphere, [0.25, 0.7, 0.7], "body", "against the right side of the body near the back",
              "x = base.max.x + part.size.x / 2; y = base.min.y + 0.9; z = base.min.z + 0.1"),
        ],
    },
    Recipe {
        keywords: &["display", "monitor", "screen"],
        parts: &[
            p("screen", Cube, [1.0, 0.05, 0.6], FIRST, "", ORIGIN),
            p("neck", Cube, [0.08, 0.08, 0.3], "screen", "below the middle of the screen", BELOW),
            p("stand base", Cube, [0.4, 0.25, 0.03], "neck", "below the neck, centered", BELOW),
        ],
    },
    Recipe {
        keywords: &["lamp"],
        parts: &[
            p("base", Cylinder, [0.3, 0.3, 0.05], FIRST, "", ORIGIN),
            p("pole", Cylinder, [0.04, 0.04, 0.8], "base", "standing on the center of the base", ON_TOP),
            p("lampshade", Cone, [0.4, 0.4, 0.3], "pole", "on top of the pole", ON_TOP),
        ],
    },
    Recipe {
        keywords: &["loudspeaker", "speaker"],
        parts: &[
            p("enclosure", Cube, [0.35, 0.3, 0.6], FIRST, "", ORIGIN),
            p("woofer", Sphere, [0.25, 0.04, 0.25], "enclosure", "on the lower part of the enclosure's front face",
              "x = base.center.x; y = base.max.y + part.size.y / 2; z = base.min.z + 0.2"),
            p("tweeter", Sphere, [0.1, 0.03, 0.1], "enclosure", "on the upper part of the enclosure's front face",
              "x = base.center.x; y = base.max.y + part.size.y / 2; z = base.max.z - 0.12"),
        ],
    },
    Recipe {
        keywords: &["rifle", "gun"],
        parts: &[
            p("receiver", Cube, [0.06, 0.4, 0.1], FIRST, "", ORIGIN),
            p("stock", Cube, [0.06, 0.35, 0.14], "receiver", "behind the receiver, slightly lower",
              "x = base.center.x; y = base.min.y - part.size.y / 2; z = base.center.z - 0.02"),
            p("barrel", Cube, [0.03, 0.7, 0.03], "receiver", "extending forward from the front of the receiver",
              "x = base.center.x; y = base.max.y + part.size.y / 2; z = base.center.z + 0.02"),
            p("magazine", Cube, [0.04, 0.08, 0.18], "receiver", "below the receiver, slightly forward",
              "x = base.center.x; y = base.center.y + 0.05; z = base.min.z - part.size.z / 2"),
        ],
    },
    Recipe {
        keywords: &["sofa", "couch"],
        parts: &[
            p("seat", Cube, [1.8, 0.8, 0.4], FIRST, "", ORIGIN),
            p("backrest", Cube, [1.8, 0.2, 0.5], "seat", "on the back edge of the seat", ON_TOP_BACK),
            p("left armrest", Cube, [0.2, 0.8, 0.3], "seat", "on the left end of the seat",
              "x = base.min.x + part.size.x / 2; y = base.center.y; z = base.max.z + part.size.z / 2"),
            p("right armrest", Cube, [0.2, 0.8, 0.3], "seat", "on the right end of the seat",
              "x = base.max.x - part.size.x / 2; y = base.center.y; z = base.max.z + part.size.z / 2"),
        ],
    },
    Recipe {
        keywords: &["telephone", "phone"],
        parts: &[
            p("body", Cube, [0.2, 0.22, 0.06], FIRST, "", ORIGIN),
            p("handset", Cube, [0.2, 0.06, 0.05], "body", "lying on the back of the body's top face", ON_TOP_BACK),
            p("keypad", Cube, [0.12, 0.1, 0.01], "body", "on the front of the body's top face",
              "x = base.center.x; y = base.max.y - part.size.y / 2 - 0.02; z = base.max.z + part.size.z / 2"),
        ],
    },
    Recipe {
        keywords: &["watercraft", "boat", "ship"],
        parts: &[
            p("hull", Cube, [0.8, 3.0, 0.4], FIRST, "", ORIGIN),
            p("cabin", Cube, [0.6, 1.0, 0.4], "hull", "on the hull's deck, toward the back",
              "x = base.center.x; y = base.center.y - 0.4; z = base.max.z + part.size.z / 2"),
            p("mast", Cylinder, [0.05, 0.05, 1.5], "cabin", "standing on the cabin roof", ON_TOP),
        ],
    },
];

static FALLBACK: Recipe = Recipe {
    keywords: &[],
    parts: &[
        p("main body", Cube, [0.5, 0.5, 0.5], FIRST, "", ORIGIN),
        p("top", Cube, [0.3, 0.3, 0.1], "main body", "on top of the main body", ON_TOP),
    ],
};

fn recipe_for(object: &str) -> &'static Recipe {
    let lower = object.to_ascii_lowercase();
    RECIPES.iter().find(|r| r.keywords.iter().any(|k| lower.contains(k))).unwrap_or(&FALLBACK)
}

/// The builder's recipe for `object`, placed, as action specs.
pub fn planned_specs(object: &str) -> Vec<PrimitiveSpec> {
    let recipe = recipe_for(object);
    let mut scene = SceneState::new();
    for part in recipe.parts {
        let spec = place(part, &scene, part.program);
        scene = scene.apply_action(&spec, 1e-3).expect("recipe parts are valid").0;
    }
    scene.specs()
}

fn place(part: &RecipePart, scene: &SceneState, program: &str) -> PrimitiveSpec {
    let dims = Vec3::from(part.dims);
    let name = ident(part.name);
    let center = if part.base.is_empty() {
        Vec3::ZERO
    } else {
        let base = scene.get(&ident(part.base)).expect("recipe base precedes part").aabb;
        let probe = spec_from_dims(&name, part.shape, dims, Vec3::ZERO, part.name);
        let size = analytic_aabb(&probe).expect("recipe spec valid").size();
        let prog = parse_program(program).expect("recipe program parses");
        eval_program(&prog, &Bindings::for_placement(&base, size)).expect("recipe program evaluates")
    };
    spec_from_dims(&name, part.shape, dims, center, part.name)
}

/// Value of the `Label: ` line in a prompt.
fn field<'a>(prompt: &'a str, label: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(label).and_then(|r| r.strip_prefix(": "))).map(str::trim)
}

/// Part names listed under "Parts built so far:".
fn built_parts(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .skip_while(|l| *l != "Parts built so far:")
        .skip(1)
        .take_while(|l| l.starts_with("- "))
        .filter_map(|l| l[2..].split(" (").next().map(str::to_string))
        .collect()
}

/// Strips the "with dimensions" tail some prompts attach to part names.
fn find_part<'a>(recipe: &'a Recipe, label: &str) -> Option<&'a RecipePart> {
    let id = ident(label);
    recipe
        .parts
        .iter()
        .find(|p| ident(p.name) == id)
        .or_else(|| recipe.parts.iter().find(|p| p.draft.is_some_and(|d| ident(d) == id)))
}

fn with_sample_variant(program: &str, sample: usize) -> String {
    let lines: Vec<String> = program.split(';').map(|l| l.trim().to_string()).collect();
    match sample % 3 {
        0 => format!("```\n{}\n```", lines.join("\n")),
        1 => {
            let mut alt: Vec<String> = lines
                .iter()
                .map(|l| {
                    let mut l = l.clone();
                    for a in ["x", "y", "z"] {
                        l = l
                            .replace(&format!("base.max.{a}"), &format!("(base.center.{a} + base.size.{a} / 2)"))
                            .replace(&format!("base.min.{a}"), &format!("(base.center.{a} - base.size.{a} / 2)"));
                    }
                    l
                })
                .collect();
            alt.reverse();
            alt.join("\n")
        }
        _ => lines
            .iter()
            .map(|l| format!("{l} + part.size.{}", &l[..1]))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

fn bindings_from_prompt(prompt: &str) -> Bindings {
    let mut b = Bindings::new();
    for line in prompt.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            if NAMESPACE.contains(&k) {
                if let Ok(v) = v.trim().parse() {
                    b.set(k, v);
                }
            }
        }
    }
    b
}

const FLOATING_LEG: &str =
    "x = base.max.x - part.size.x / 2; y = base.max.y - part.size.y / 2; z = base.min.z - part.size.z / 2 - 0.2";

pub struct Builder {
    pub fault: Fault,
}

impl Builder {
    pub fn reply(&self, req: &ChatRequest, key: &ExchangeKey) -> Result<String, GatewayError> {
        match self.fault {
            Fault::AlwaysError => return Err(GatewayError::backend("scripted backend failure")),
            Fault::Garbled => return Ok("???".into()),
            _ => {}
        }
        let prompt = req.prompt();
        let object = field(prompt, "Object").unwrap_or("");
        let recipe = recipe_for(object);
        let built = built_parts(prompt);
        let next = recipe.parts.iter().find(|p| !built.contains(&ident(p.name)));
        let part_of = |label: &str| field(prompt, label).and_then(|n| find_part(recipe, n));
        let out = match req.tag.as_str() {
            "l3go_part_gen" => match next {
                Some(p) => {
                    let critiqued = prompt.contains("A reviewer rejected your previous proposal");
                    format!("PART: {}", p.draft.filter(|_| !critiqued).unwrap_or(p.name))
                }
                None => "PART: decoration".into(),
            },
            "l3go_part_dims" => match part_of("Part") {
                Some(p) => format!("DIMS: {}, {}, {}", p.dims[0], p.dims[1], p.dims[2]),
                None => "DIMS: 0.1, 0.1, 0.1".into(),
            },
            "l3go_part_critic" => {
                let label = field(prompt, "Proposed part").unwrap_or("");
                match recipe.parts.iter().find(|p| p.draft.is_some_and(|d| ident(d) == ident(label))) {
                    Some(p) => format!(
                        "REVISE: '{label}' is ambiguous because the object has several of them; \
                         name it with a spatial descriptor such as '{}'.",
                        p.name
                    ),
                    None => "APPROVE".into(),
                }
            }
            "l3go_shape" => match part_of("Part") {
                Some(p) => format!("SHAPE: {}", p.shape.as_str()),
                None => "SHAPE: cube".into(),
            },
            "l3go_spatial_gen" => match part_of("New part") {
                Some(p) => format!("BASE: {}\nRELATION: {}", p.base, p.relation),
                None => format!("BASE: {}\nRELATION: on top", built.first().map_or("", String::as_str)),
            },
            "l3go_coord" => {
                let Some(p) = part_of("New part") else {
                    return Ok(ON_TOP.replace("; ", "\n"));
                };
                let first_try = !prompt.contains("rejected by the spatial check");
                let program =
                    if self.fault == Fault::FaultyLeg && p.name == "front right leg" && first_try {
                        FLOATING_LEG
                    } else {
                        p.program
                    };
                if prompt.contains("CENTER: <x>") {
                    let prog = parse_program(program).expect("recipe program parses");
                    match eval_program(&prog, &bindings_from_prompt(prompt)) {
                        Ok(c) => format!("CENTER: {}, {}, {}", c.x, c.y, c.z),
                        Err(e) => format!("I could not compute it: {e}"),
                    }
                } else if prompt.contains("Your previous program could not be used") {
                    program.replace("; ", "\n")
                } else {
                    with_sample_variant(program, key.sample)
                }
            }
            "l3go_completion" => {
                let done = recipe.parts.iter().all(|p| built.contains(&ident(p.name)));
                format!("COMPLETE: {}", if done { "yes" } else { "no" })
            }
            "react" => self.react(prompt, recipe, &built),
            "reflexion_reflect" => {
                if prompt.contains("Warning:") {
                    "Reflection: The part I just built does not attach properly to the rest of the object; \
                     it must touch the part it belongs to.\nDecision: redo"
                        .into()
                } else {
                    "Reflection: The part is sized and placed consistently with the rest.\nDecision: move on".into()
                }
            }
            "single_shot" => format!("```\n{}```", format_script(&planned_specs(object))),
            _ => "I am not sure.".into(),
        };
        Ok(out)
    }

    fn react(&self, prompt: &str, recipe: &Recipe, built: &[String]) -> String {
        let history_empty = prompt.contains("History:\n(none)");
        if self.fault == Fault::ReactTypo && history_empty {
            return "Thought: I will start with the main part.\nAction: cube name=start location=(0,0,oops)".into();
        }
        let object = field(prompt, "Object").unwrap_or("");
        let plan = planned_specs(object);
        let Some((idx, spec)) = plan.iter().enumerate().find(|(_, s)| !built.contains(&s.name)) else {
            return "Thought: All parts are in place, so the object is finished.\nAction: done".into();
        };
        let label = recipe.parts[idx].name;
        let mut spec = spec.clone();
        let redoing = prompt.contains("Reflection on your previous step");
        if self.fault == Fault::ReflexionRedo && idx == 1 && !redoing {
            spec.location.z -= 0.3;
        }
        format!("Thought: Next I will add the {label}.\nAction: {}", format_action(&spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_plans_a_connected_uncontained_scene() {
        for r in RECIPES.iter().chain([&FALLBACK]) {
            let obj = r.keywords.first().copied().unwrap_or("thing");
            let mut s = SceneState::new();
            for spec in planned_specs(obj) {
                let (next, report) = s.apply_action(&spec, 1e-3).unwrap();
                assert!(report.is_clean(), "{obj}: {}", report.summary_text);
                s = next;
            }
            assert_eq!(s.len(), r.parts.len(), "{obj}");
            assert!(s.is_connected(1e-3), "{obj}");
            assert!(s.contained_parts().is_empty(), "{obj}");
        }
    }

    #[test]
    fn sample_variants_are_distinct_and_two_agree() {
        let base = crate::Aabb::new(Vec3::new(-0.25, -0.25, -0.025), Vec3::new(0.25, 0.25, 0.025));
        let b = Bindings::for_placement(&base, Vec3::new(0.05, 0.05, 0.45));
        let texts: Vec<String> = (0..3).map(|i| with_sample_variant(FR_BELOW, i)).collect();
        assert!(texts[0] != texts[1] && texts[1] != texts[2] && texts[0] != texts[2]);
        let vals: Vec<Vec3> = texts
            .iter()
            .map(|t| eval_program(&parse_program(&crate::agent::parse::code_block(t)).unwrap(), &b).unwrap())
            .collect();
        assert!((vals[0] - vals[1]).length() < 1e-12);
        assert!((vals[0] - vals[2]).length() > 0.01);
    }

    #[test]
    fn unknown_policy() {
        assert!(named_policy("nope").is_none());
        for n in POLICY_NAMES {
            assert!(named_policy(n).is_some(), "{n}");
        }
    }
}
