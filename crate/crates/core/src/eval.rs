//! Judge-based evaluation: classification of rendered views, accuracy
//! tables, inter-rater agreement, and pairwise comparison manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError};

pub const SHAPENET13_TXT: &str = include_str!("../data/shapenet13.txt");
pub const UFO_PROMPTS_TXT: &str = include_str!("../data/ufo_prompts.txt");

fn lines(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

pub fn shapenet13() -> Vec<String> {
    lines(SHAPENET13_TXT)
}

pub fn ufo_prompts() -> Vec<String> {
    lines(UFO_PROMPTS_TXT)
}

/// Classification prompt; `{options}` becomes the comma-separated categories.
pub const JUDGE_PROMPT: &str = "What object do you see in these images? Answer with a single object name. \
     Your answer must be one of the following options: [{options}]";

/// Predicted label for replies that name no single category.
pub const UNPARSABLE: &str = "unparsable";

pub const JUDGE_TAG: &str = "judge";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Backend(#[from] GatewayError),
    #[error("invalid judge configuration: {0}")]
    InvalidJudge(String),
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label vectors are empty")]
    Empty,
    #[error("no run of model '{model}' for prompt '{prompt}'")]
    MissingRuns { model: String, prompt: String },
    #[error("{0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeConfig {
    pub categories: Vec<String>,
    pub prompt: String,
}

impl JudgeConfig {
    pub fn new(categories: Vec<String>) -> Self {
        JudgeConfig { categories, prompt: JUDGE_PROMPT.to_string() }
    }

    pub fn shapenet13() -> Self {
        Self::new(shapenet13())
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.categories.is_empty() {
            return Err(EvalError::InvalidJudge("no categories".into()));
        }
        let unique: BTreeSet<String> = self.categories.iter().map(|c| normalize(c)).collect();
        if unique.len() != self.categories.len() || unique.contains("") {
            return Err(EvalError::InvalidJudge("categories must be unique and nonempty".into()));
        }
        Ok(())
    }

    pub fn rendered_prompt(&self) -> String {
        self.prompt.replace("{options}", &self.categories.join(", "))
    }
}

/// Lowercase words separated by single spaces.
fn normalize(s: &str) -> String {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

const REFUSAL_PATTERNS: [&str; 10] = [
    "i cannot assist",
    "i can t assist",
    "i cannot help",
    "i can t help",
    "i m unable to",
    "i am unable to",
    "unable to assist",
    "i cannot provide",
    "i can t provide",
    "i cannot comply",
];

pub fn is_refusal(reply: &str) -> bool {
    let n = normalize(reply);
    REFUSAL_PATTERNS.iter().any(|p| n.contains(p))
}

/// The single category a reply names, ignoring case, punctuation and a plural "s".
pub fn match_category(reply: &str, categories: &[String]) -> Option<String> {
    let words: Vec<String> = normalize(reply)
        .split(' ')
        .map(|w| w.to_string())
        .collect();
    let singular: Vec<String> =
        words.iter().map(|w| if w.len() > 3 && w.ends_with('s') { w[..w.len() - 1].to_string() } else { w.clone() }).collect();
    let mut found: Vec<&String> = Vec::new();
    for c in categories {
        let cw: Vec<String> = normalize(c).split(' ').map(str::to_string).collect();
        let hit = |ws: &[String]| ws.windows(cw.len()).any(|win| win == cw.as_slice());
        if hit(&words) || hit(&singular) {
            found.push(c);
        }
    }
    match found.as_slice() {
        [one] => Some((*one).clone()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    /// A category, or [`UNPARSABLE`].
    pub predicted: String,
    pub raw_reply: String,
    pub refused: bool,
}

/// One multimodal request carrying every view; PNG bytes in, label out.
pub fn classify_mesh(images: &[Vec<u8>], judge: &JudgeConfig, gw: &Gateway) -> Result<Judgement, EvalError> {
    judge.validate()?;
    if images.is_empty() {
        return Err(EvalError::InvalidInput("no images to classify".into()));
    }
    let req = ChatRequest::new(JUDGE_TAG, vec![ChatMessage::user(judge.rendered_prompt()).with_images(images.to_vec())]);
    let reply = gw.complete(&req)?;
    Ok(judge_reply(&reply, judge))
}

pub fn judge_reply(reply: &str, judge: &JudgeConfig) -> Judgement {
    let refused = is_refusal(reply);
    let predicted = if refused { None } else { match_category(reply, &judge.categories) };
    Judgement { predicted: predicted.unwrap_or_else(|| UNPARSABLE.into()), raw_reply: reply.to_string(), refused }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub object_id: String,
    pub true_category: String,
    pub predicted: String,
    pub raw_reply: String,
    #[serde(default)]
    pub refused: bool,
}

impl EvalRecord {
    pub fn correct(&self) -> bool {
        self.predicted == self.true_category
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub per_category: BTreeMap<String, CategoryScore>,
    /// Unweighted mean over categories.
    pub mean: f64,
    pub records: usize,
    pub refusals: usize,
}

pub fn aggregate_accuracy(records: &[EvalRecord]) -> AccuracyReport {
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per.entry(r.true_category.clone()).or_default();
        e.1 += 1;
        if r.correct() {
            e.0 += 1;
        }
    }
    let per_category: BTreeMap<String, CategoryScore> = per
        .into_iter()
        .map(|(k, (correct, total))| (k, CategoryScore { correct, total, accuracy: correct as f64 / total as f64 }))
        .collect();
    let mean = if per_category.is_empty() {
        0.0
    } else {
        per_category.values().map(|s| s.accuracy).sum::<f64>() / per_category.len() as f64
    };
    AccuracyReport { per_category, mean, records: records.len(), refusals: records.iter().filter(|r| r.refused).count() }
}

impl AccuracyReport {
    /// Header and one row: the label, each category's accuracy, then the mean.
    pub fn table(&self, label: &str) -> String {
        let cats: Vec<&String> = self.per_category.keys().collect();
        let width = label.len().max(5);
        let mut head = format!("{:<width$}", "agent");
        let mut row = format!("{label:<width$}");
        for c in &cats {
            let w = c.len().max(5);
            head.push_str(&format!(" | {c:>w$}"));
            row.push_str(&format!(" | {:>w$.3}", self.per_category[*c].accuracy));
        }
        head.push_str(" |  mean");
        row.push_str(&format!(" | {:.3}", self.mean));
        format!("{head}\n{row}\n")
    }
}

/// Agreement beyond chance between two raters over the same items.
pub fn cohens_kappa<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = a.len() as f64;
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.as_ref(), y.as_ref());
        counts.entry(x).or_default().0 += 1;
        counts.entry(y).or_default().1 += 1;
        if x == y {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = counts.values().map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n)).sum();
    if p_e >= 1.0 {
        // Both raters used one and the same label throughout.
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// One finished build available for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRef {
    pub prompt: String,
    pub gif: PathBuf,
    pub sheet: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSide {
    pub model: String,
    pub gif: PathBuf,
    pub sheet: PathBuf,
    /// Prompt the shown run was built from.
    pub built_from: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Comparison,
    AttentionCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub row: usize,
    pub kind: RowKind,
    pub caption: String,
    pub left: ManifestSide,
    pub right: ManifestSide,
    /// For attention checks, the side that matches the caption.
    pub expected: Option<String>,
}

pub const ATTENTION_CHECKS: usize = 4;

fn pick<'a>(runs: &'a [RunRef], model: &str, prompt: &str, rng: &mut ChaCha8Rng) -> Result<&'a RunRef, EvalError> {
    let matching: Vec<&RunRef> = runs.iter().filter(|r| r.prompt == prompt).collect();
    if matching.is_empty() {
        return Err(EvalError::MissingRuns { model: model.into(), prompt: prompt.into() });
    }
    Ok(matching[rng.gen_range(0..matching.len())])
}

fn side(model: &str, run: &RunRef) -> ManifestSide {
    ManifestSide { model: model.into(), gif: run.gif.clone(), sheet: run.sheet.clone(), built_from: run.prompt.clone() }
}

/// Pairwise comparison rows with seeded left/right placement, plus
/// attention checks that pair a caption's run with a run for another prompt.
pub fn ufo_manifest(
    model_a: (&str, &[RunRef]),
    model_b: (&str, &[RunRef]),
    prompts: &[String],
    seed: u64,
) -> Result<Vec<ManifestRow>, EvalError> {
    if prompts.len() < 2 {
        return Err(EvalError::InvalidInput("attention checks need at least two prompts".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(prompts.len() + ATTENTION_CHECKS);
    for prompt in prompts {
        let a = side(model_a.0, pick(model_a.1, model_a.0, prompt, &mut rng)?);
        let b = side(model_b.0, pick(model_b.1, model_b.0, prompt, &mut rng)?);
        let (left, right) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        rows.push(ManifestRow { row: 0, kind: RowKind::Comparison, caption: prompt.clone(), left, right, expected: None });
    }
    for _ in 0..ATTENTION_CHECKS {
        let i = rng.gen_range(0..prompts.len());
        let j = (i + 1 + rng.gen_range(0..prompts.len() - 1)) % prompts.len();
        let (model, runs) = if rng.gen_bool(0.5) { model_a } else { model_b };
        let good = side(model, pick(runs, model, &prompts[i], &mut rng)?);
        let bad = side(model, pick(runs, model, &prompts[j], &mut rng)?);
        let good_left = rng.gen_bool(0.5);
        let (left, right) = if good_left { (good, bad) } else { (bad, good) };
        let at = rng.gen_range(0..=rows.len());
        rows.insert(
            at,
            ManifestRow {
                row: 0,
                kind: RowKind::AttentionCheck,
                caption: prompts[i].clone(),
                left,
                right,
                expected: Some(if good_left { "left" } else { "right" }.into()),
            },
        );
    }
    for (k, r) in rows.iter_mut().enumerate() {
        r.row = k + 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use std::sync::Arc;

    #[test]
    fn bundled_lists() {
        let cats = shapenet13();
        assert_eq!(cats.len(), 13);
        assert_eq!(cats.first().map(String::as_str), Some("airplane"));
        assert_eq!(cats.last().map(String::as_str), Some("watercraft"));
        let ufo = ufo_prompts();
        assert_eq!(ufo.len(), 50);
        assert_eq!(ufo.iter().collect::<BTreeSet<_>>().len(), 50);
        assert_eq!(ufo[2], "a chair with five legs");
    }

    #[test]
    fn judge_prompt_text() {
        assert_eq!(
            JudgeConfig::shapenet13().rendered_prompt(),
            "What object do you see in these images? Answer with a single object name. Your answer must be one of \
             the following options: [airplane, bench, cabinet, car, chair, display, lamp, loudspeaker, rifle, sofa, \
             table, telephone, watercraft]"
        );
    }

    #[test]
    fn reply_normalization() {
        let j = JudgeConfig::shapenet13();
        assert_eq!(judge_reply("chair", &j).predicted, "chair");
        assert_eq!(judge_reply("It is a Lamp.", &j).predicted, "lamp");
        assert_eq!(judge_reply("**TABLE**", &j).predicted, "table");
        assert_eq!(judge_reply("Two chairs", &j).predicted, "chair");
        assert_eq!(judge_reply("a chair or a sofa", &j).predicted, UNPARSABLE);
        assert_eq!(judge_reply("a spaceship", &j).predicted, UNPARSABLE);
        assert_eq!(judge_reply("cart", &j).predicted, UNPARSABLE);
        let r = judge_reply("I'm sorry, but I cannot assist with this request.", &j);
        assert!(r.refused);
        assert_eq!(r.predicted, UNPARSABLE);
    }

    #[test]
    fn judge_config_validation() {
        assert!(JudgeConfig::new(vec![]).validate().is_err());
        assert!(JudgeConfig::new(vec!["chair".into(), "Chair".into()]).validate().is_err());
    }

    #[test]
    fn classify_sends_all_images_in_one_request() {
        let gw = Gateway::new(Arc::new(ScriptedBackend::new(|r, _| {
            assert_eq!(r.messages.len(), 1);
            Ok(format!("{} images, looks like a car", r.messages[0].images.len()))
        })));
        let imgs = vec![vec![1u8]; 10];
        let j = classify_mesh(&imgs, &JudgeConfig::shapenet13(), &gw).unwrap();
        assert_eq!(j.predicted, "car");
        assert!(classify_mesh(&[], &JudgeConfig::shapenet13(), &gw).is_err());
    }

    fn rec(cat: &str, pred: &str) -> EvalRecord {
        EvalRecord { object_id: String::new(), true_category: cat.into(), predicted: pred.into(), raw_reply: pred.into(), refused: false }
    }

    #[test]
    fn accuracy() {
        let all: Vec<EvalRecord> = shapenet13().iter().map(|c| rec(c, c)).collect();
        assert_eq!(aggregate_accuracy(&all).mean, 1.0);
        let mut mixed = vec![rec("chair", "chair"), rec("chair", UNPARSABLE), rec("lamp", "lamp")];
        let r = aggregate_accuracy(&mixed);
        assert_eq!(r.per_category["chair"].accuracy, 0.5);
        assert_eq!(r.mean, 0.75);
        mixed.reverse();
        assert_eq!(aggregate_accuracy(&mixed), r);
        assert_eq!(aggregate_accuracy(&[]).mean, 0.0);
        let t = r.table("l3go");
        assert_eq!(t, "agent | chair |  lamp |  mean\nl3go  | 0.500 | 1.000 | 0.750\n");
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohens_kappa(&["a", "b", "a"], &["a", "b", "a"]).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&["a", "a"], &["a", "a"]).unwrap(), 1.0);
        let a: Vec<&str> = "AAAAABBBBB".split("").filter(|s| !s.is_empty()).collect();
        let b: Vec<&str> = "AAAABABBBB".split("").filter(|s| !s.is_empty()).collect();
        assert!((cohens_kappa(&a, &b).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(cohens_kappa(&a, &b).unwrap(), cohens_kappa(&b, &a).unwrap());
        assert!(matches!(cohens_kappa(&["a"], &["a", "b"]), Err(EvalError::LengthMismatch(1, 2))));
        assert!(matches!(cohens_kappa::<&str>(&[], &[]), Err(EvalError::Empty)));
    }

    fn runs(prompts: &[String], tag: &str) -> Vec<RunRef> {
        prompts
            .iter()
            .enumerate()
            .map(|(i, p)| RunRef { prompt: p.clone(), gif: format!("{tag}/{i}.gif").into(), sheet: format!("{tag}/{i}.png").into() })
            .collect()
    }

    #[test]
    fn manifest_rows_and_checks() {
        let prompts = ufo_prompts();
        let (a, b) = (runs(&prompts, "a"), runs(&prompts, "b"));
        let m = ufo_manifest(("l3go", &a), ("other", &b), &prompts, 7).unwrap();
        assert_eq!(m.len(), 54);
        assert_eq!(m.iter().filter(|r| r.kind == RowKind::AttentionCheck).count(), 4);
        assert!(m.iter().enumerate().all(|(i, r)| r.row == i + 1));
        for r in &m {
            match r.kind {
                RowKind::Comparison => {
                    assert_ne!(r.left.model, r.right.model);
                    assert_eq!(r.left.built_from, r.caption);
                    assert_eq!(r.right.built_from, r.caption);
                }
                RowKind::AttentionCheck => {
                    let good = if r.expected.as_deref() == Some("left") { &r.left } else { &r.right };
                    let bad = if r.expected.as_deref() == Some("left") { &r.right } else { &r.left };
                    assert_eq!(good.built_from, r.caption);
                    assert_ne!(bad.built_from, r.caption);
                }
            }
        }
        let lefts = m.iter().filter(|r| r.kind == RowKind::Comparison && r.left.model == "l3go").count();
        assert!(lefts > 10 && lefts < 40, "{lefts}");
        assert_eq!(m, ufo_manifest(("l3go", &a), ("other", &b), &prompts, 7).unwrap());
        assert_ne!(m, ufo_manifest(("l3go", &a), ("other", &b), &prompts, 8).unwrap());

        match ufo_manifest(("l3go", &a), ("other", &b[1..]), &prompts, 7) {
            Err(EvalError::MissingRuns { model, prompt }) => {
                assert_eq!(model, "other");
                assert_eq!(prompt, prompts[0]);
            }
            other => panic!("{other:?}"),
        }
    }
}
