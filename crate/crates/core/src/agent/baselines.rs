use serde_json::json;

use super::parse::{self, Decision};
use super::{AgentConfig, AgentError, BuildResult, BuildStatus, Session, CRITIC_TEMPERATURE, GENERATOR_TEMPERATURE};
use crate::blenv::{feedback_text, parse_action_script, parse_action_script_partial};
use crate::gateway::Gateway;

pub fn run_react_b(prompt: &str, cfg: &AgentConfig, gw: &Gateway) -> BuildResult {
    react_loop(prompt, cfg, gw, false)
}

pub fn run_reflexion_b(prompt: &str, cfg: &AgentConfig, gw: &Gateway) -> BuildResult {
    react_loop(prompt, cfg, gw, true)
}

fn react_loop(prompt: &str, cfg: &AgentConfig, gw: &Gateway, reflexion: bool) -> BuildResult {
    let mut s = Session::new(prompt, cfg, gw);
    if let Err(e) = cfg.validate() {
        return s.finish_with(Err(AgentError::Config(e)));
    }
    let outcome = s.react(reflexion);
    s.finish_with(outcome)
}

impl Session<'_> {
    fn react(&mut self, reflexion: bool) -> Result<BuildStatus, AgentError> {
        let mut history: Vec<String> = Vec::new();
        let mut reflection = String::new();
        for step in 1..=self.cfg.max_steps {
            if self.scene.len() >= self.cfg.max_parts {
                return Ok(BuildStatus::MaxPartsReached);
            }
            let parts = self.parts_so_far();
            let hist = if history.is_empty() { "(none)".to_string() } else { history.join("\n\n") };
            let prompt =
                self.render("react", &[("parts_so_far", &parts), ("history", &hist), ("reflection", &reflection)]);
            let (idx, reply) = self.ask("react", &prompt, GENERATOR_TEMPERATURE)?;
            let (thought, action) = parse::react(&reply);
            self.records[idx].parsed = json!({ "thought": thought, "action": action });

            let Some(action) = action else {
                let obs = "Your reply had no 'Action:' line. Reply with a Thought line and an Action line.";
                history.push(format!("Step {step}:\nThought: {thought}\nAction: (missing)\nObservation: {obs}"));
                continue;
            };
            if action.eq_ignore_ascii_case("done") {
                return Ok(BuildStatus::Completed);
            }
            let (observation, created) = self.react_act(&action);
            history.push(format!("Step {step}:\nThought: {thought}\nAction: {action}\nObservation: {}", observation.trim_end()));
            reflection.clear();
            if reflexion {
                reflection = self.reflect(&action, &observation, created.as_deref())?;
            }
        }
        self.note(format!("step cap of {} reached", self.cfg.max_steps));
        Ok(BuildStatus::MaxPartsReached)
    }

    /// Applies one action line; returns the observation and the created part.
    fn react_act(&mut self, line: &str) -> (String, Option<String>) {
        let specs = match parse_action_script(line) {
            Ok(specs) => specs,
            Err(e) => return (format!("Error: could not parse the action: {e}"), None),
        };
        let [spec] = match <[_; 1]>::try_from(specs) {
            Ok(one) => one,
            Err(_) => return ("Error: each step must contain exactly one action.".to_string(), None),
        };
        match self.scene.apply_action(&spec, self.cfg.touch_eps) {
            Ok((next, report)) => {
                let feedback = feedback_text(&report, &next);
                self.scene = next;
                self.env_record(&spec, Some(feedback.clone()), "accepted".into());
                (feedback, Some(spec.name))
            }
            Err(e) => {
                let obs = format!("Error: {e}");
                self.env_record(&spec, Some(obs.clone()), format!("rejected: {e}"));
                (obs, None)
            }
        }
    }

    /// Returns the text to inject into the next step's prompt.
    fn reflect(&mut self, action: &str, feedback: &str, created: Option<&str>) -> Result<String, AgentError> {
        let parts = self.parts_so_far();
        let prompt = self.render(
            "reflexion_reflect",
            &[("parts_so_far", &parts), ("action", action), ("feedback", feedback.trim_end())],
        );
        let (idx, reply) = self.ask("reflexion_reflect", &prompt, CRITIC_TEMPERATURE)?;
        let (text, decision) = parse::reflection(&reply);
        self.records[idx].parsed = json!({
            "reflection": text,
            "decision": match decision {
                Some(Decision::Redo) => "redo",
                Some(Decision::MoveOn) => "move on",
                None => "unparsed",
            },
        });
        if decision != Some(Decision::Redo) {
            if decision.is_none() {
                self.records[idx].feedback = Some("decision not understood; moving on".into());
            }
            return Ok(String::new());
        }
        match created {
            Some(name) if self.scene.contains(name) => {
                self.remove(name, "removed for redo after reflection")?;
            }
            _ => self.note("redo requested but the last step created no part; nothing to undo"),
        }
        Ok(format!("\nReflection on your previous step, which was undone so you can redo it:\n{text}\n"))
    }
}

pub fn run_single_shot(prompt: &str, cfg: &AgentConfig, gw: &Gateway) -> BuildResult {
    let mut s = Session::new(prompt, cfg, gw);
    if let Err(e) = cfg.validate() {
        return s.finish_with(Err(AgentError::Config(e)));
    }
    let outcome = s.single_shot();
    s.finish_with(outcome)
}

impl Session<'_> {
    fn single_shot(&mut self) -> Result<BuildStatus, AgentError> {
        let prompt = self.render("single_shot", &[]);
        let (idx, reply) = self.ask("single_shot", &prompt, GENERATOR_TEMPERATURE)?;
        let script = parse::code_block(&reply);
        if script.trim().is_empty() {
            return Err(AgentError::EmptyResponse);
        }
        let (specs, err) = parse_action_script_partial(&script);
        self.records[idx].parsed = json!({
            "actions": specs.len(),
            "error": err.as_ref().map(|e| e.to_string()),
        });
        for spec in &specs {
            let (next, report) = self.scene.apply_action(spec, self.cfg.touch_eps)?;
            let feedback = feedback_text(&report, &next);
            self.scene = next;
            self.env_record(spec, Some(feedback), "accepted".into());
        }
        match err {
            Some(e) => Err(AgentError::Syntax(e.to_string())),
            None => Ok(BuildStatus::Completed),
        }
    }
}
