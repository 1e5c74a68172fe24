use serde_json::{json, Value};

use super::parse::{self, Verdict};
use super::{
    mapped_size, spec_from_dims, vec_json, dims_text, AgentConfig, AgentError, BuildResult, BuildStatus,
    PartProposal, Session, SpatialSpec, CRITIC_TEMPERATURE, GENERATOR_TEMPERATURE,
};
use crate::blenv::feedback_text;
use crate::dsl::{eval_program, majority_vote, parse_program, Bindings};
use crate::gateway::Gateway;
use crate::geometry::{PrimitiveKind, PrimitiveSpec, Vec3};

enum Placement {
    Accepted,
    Rejected { feedback: String },
}

enum Completion {
    Done,
    Continue,
    Capped,
}

pub fn run_l3go(prompt: &str, cfg: &AgentConfig, gw: &Gateway) -> BuildResult {
    let mut s = Session::new(prompt, cfg, gw);
    if let Err(e) = cfg.validate() {
        return s.finish_with(Err(AgentError::Config(e)));
    }
    let outcome = (|| loop {
        s.build_one_part()?;
        match s.completion_check()? {
            Completion::Done => return Ok(BuildStatus::Completed),
            Completion::Capped => return Ok(BuildStatus::MaxPartsReached),
            Completion::Continue => {}
        }
    })();
    s.finish_with(outcome)
}

impl Session<'_> {
    fn build_one_part(&mut self) -> Result<(), AgentError> {
        let proposal = self.settle_proposal()?;
        let name = self.unique_name(&proposal.name);
        let kind = self.choose_shape(&proposal)?;
        let size = mapped_size(kind, proposal.dims);
        let rounds = self.cfg.spatial_retry_rounds;
        let mut feedback: Option<String> = None;
        for attempt in 0..=rounds {
            let center = if self.scene.is_empty() {
                Vec3::ZERO
            } else {
                self.plan_spatial(&proposal, size, feedback.as_deref())?.1
            };
            let spec = spec_from_dims(&name, kind, proposal.dims, center, &proposal.name);
            match self.apply_and_critique(&spec, attempt == rounds)? {
                Placement::Accepted => return Ok(()),
                Placement::Rejected { feedback: fb } => feedback = Some(fb),
            }
        }
        unreachable!("the final attempt is always accepted")
    }

    /// Proposal and critique rounds; the last round is approved regardless.
    fn settle_proposal(&mut self) -> Result<PartProposal, AgentError> {
        let mut critique = String::new();
        let rounds = self.cfg.part_critic_rounds;
        for round in 1..=rounds {
            let proposal = self.propose_part(&critique)?;
            match self.critique_part(&proposal)? {
                Verdict::Approved => return Ok(proposal),
                Verdict::Revise(reason) if round < rounds => {
                    critique = format!(
                        "A reviewer rejected your previous proposal \"{}\": {}\nPropose a corrected part.\n\n",
                        proposal.name, reason
                    );
                }
                Verdict::Revise(_) => {
                    self.note(format!(
                        "part critic rounds exhausted; proposal '{}' accepted as is",
                        proposal.name
                    ));
                    return Ok(proposal);
                }
            }
        }
        unreachable!("part_critic_rounds >= 1")
    }

    pub(super) fn propose_part(&mut self, critique: &str) -> Result<PartProposal, AgentError> {
        let parts = self.parts_so_far();
        let prompt = self.render("l3go_part_gen", &[("parts_so_far", &parts), ("critique", critique)]);
        let name = self
            .ask_parsed(
                "l3go_part_gen",
                &prompt,
                GENERATOR_TEMPERATURE,
                "Reply with exactly one line: PART: <part name>",
                parse::part_name,
                |n| json!({ "name": n }),
            )?
            .map_err(|response| AgentError::UnparsableResponse { component: "l3go_part_gen".into(), response })?;

        let prompt = self.render("l3go_part_dims", &[("parts_so_far", &parts), ("part", &name)]);
        let dims = self
            .ask_parsed(
                "l3go_part_dims",
                &prompt,
                GENERATOR_TEMPERATURE,
                "Reply with exactly one line: DIMS: <width>, <depth>, <height>, using positive numbers.",
                parse::dims,
                |d| vec_json(*d),
            )?
            .map_err(|response| AgentError::UnparsableResponse { component: "l3go_part_dims".into(), response })?;
        Ok(PartProposal { name, dims })
    }

    pub(super) fn critique_part(&mut self, p: &PartProposal) -> Result<Verdict, AgentError> {
        let parts = self.parts_so_far();
        let dims = dims_text(p.dims);
        let prompt =
            self.render("l3go_part_critic", &[("parts_so_far", &parts), ("part", &p.name), ("dims", &dims)]);
        let (idx, reply) = self.ask("l3go_part_critic", &prompt, CRITIC_TEMPERATURE)?;
        let verdict = match parse::verdict(&reply) {
            Some(v) => v,
            None => {
                self.records[idx].feedback = Some("critic reply not understood; treated as approval".into());
                Verdict::Approved
            }
        };
        self.records[idx].parsed = match &verdict {
            Verdict::Approved => json!({ "verdict": "approve" }),
            Verdict::Revise(r) => json!({ "verdict": "revise", "reason": r }),
        };
        Ok(verdict)
    }

    fn choose_shape(&mut self, p: &PartProposal) -> Result<PrimitiveKind, AgentError> {
        let dims = dims_text(p.dims);
        let prompt = self.render("l3go_shape", &[("part", &p.name), ("dims", &dims)]);
        let kind = self.ask_parsed(
            "l3go_shape",
            &prompt,
            GENERATOR_TEMPERATURE,
            "Reply with exactly one line: SHAPE: <cube|cylinder|cone|sphere|torus>",
            parse::shape,
            |k| json!({ "kind": k.as_str() }),
        )?;
        Ok(kind.unwrap_or_else(|_| {
            self.note(format!("no valid shape for '{}'; defaulting to cube", p.name));
            PrimitiveKind::Cube
        }))
    }

    fn resolve_base(&self, reply: &str) -> Option<String> {
        let id = parse::ident(reply);
        let id = id.strip_prefix("the_").unwrap_or(&id).to_string();
        if self.scene.contains(&id) {
            return Some(id);
        }
        self.scene
            .parts()
            .filter(|p| id.contains(&p.name))
            .max_by_key(|p| p.name.len())
            .map(|p| p.name.clone())
    }

    fn spatial_spec(&mut self, p: &PartProposal, feedback: &str) -> Result<SpatialSpec, AgentError> {
        let parts = self.parts_so_far();
        let dims = dims_text(p.dims);
        let vars = [("parts_so_far", parts.as_str()), ("part", &p.name), ("dims", &dims), ("feedback", feedback)];
        let prompt = self.render("l3go_spatial_gen", &vars);
        let mut prompt_now = prompt.clone();
        for attempt in 0..2 {
            let (idx, reply) = self.ask("l3go_spatial_gen", &prompt_now, GENERATOR_TEMPERATURE)?;
            let Some((base, relation)) = parse::base_relation(&reply) else {
                self.records[idx].verdict = Some("unparsable".into());
                if attempt == 1 {
                    return Err(AgentError::UnparsableResponse { component: "l3go_spatial_gen".into(), response: reply });
                }
                prompt_now = format!(
                    "{prompt}\nYour previous reply did not follow the required format. \
                     Reply with exactly two lines: BASE: <name of an existing part> and RELATION: <spatial relationship>\n"
                );
                continue;
            };
            match self.resolve_base(&base) {
                Some(base_part) => {
                    self.records[idx].parsed = json!({ "base": base_part, "relation": relation });
                    return Ok(SpatialSpec { base_part, relation });
                }
                None => {
                    self.records[idx].verdict = Some(format!("unknown base part '{base}'"));
                    if attempt == 1 {
                        return Err(AgentError::UnknownBasePart(base));
                    }
                    let names: Vec<&str> = self.scene.parts().map(|p| p.name.as_str()).collect();
                    prompt_now = format!(
                        "{prompt}\n'{base}' is not an existing part. The base part must be one of: {}.\n",
                        names.join(", ")
                    );
                }
            }
        }
        unreachable!()
    }

    /// Base part and relation, then the voted (or directly stated) center.
    pub(super) fn plan_spatial(
        &mut self,
        p: &PartProposal,
        size: Vec3,
        feedback: Option<&str>,
    ) -> Result<(SpatialSpec, Vec3), AgentError> {
        let feedback = feedback
            .map(|f| format!("\nThe previous placement was rejected by the spatial check:\n{f}"))
            .unwrap_or_default();
        let spatial = self.spatial_spec(p, &feedback)?;
        let base = self.scene.get(&spatial.base_part).expect("resolved base exists").aabb;
        let bindings = Bindings::for_placement(&base, size);
        let doc = bindings.describe();
        let dims = dims_text(size);
        let vars = [
            ("part", p.name.as_str()),
            ("dims", &dims),
            ("base", &spatial.base_part),
            ("relation", &spatial.relation),
            ("feedback", &feedback),
            ("bindings_doc", &doc),
        ];

        if self.cfg.ablate_program_calc {
            let prompt = self.render("l3go_coord_direct", &vars);
            let center = self
                .ask_parsed(
                    "l3go_coord",
                    &prompt,
                    GENERATOR_TEMPERATURE,
                    "Reply with exactly one line: CENTER: <x>, <y>, <z>",
                    parse::center,
                    |c| json!({ "center": vec_json(*c) }),
                )?
                .map_err(|_| AgentError::AllSamplesUnparsable)?;
            return Ok((spatial, center));
        }

        let prompt = self.render("l3go_coord", &vars);
        let req = self.request("l3go_coord", &prompt, GENERATOR_TEMPERATURE);
        let replies = self.gw.complete_n(&req, self.cfg.vote.samples);
        let eval = |text: &str| -> Result<(String, Vec3), String> {
            let program = parse_program(&parse::code_block(text)).map_err(|e| e.to_string())?;
            let c = eval_program(&program, &bindings).map_err(|e| e.to_string())?;
            Ok((program.to_string(), c))
        };
        let mut samples = Vec::new();
        let mut backend_error = None;
        for out in replies {
            let idx = self.push_exchange("l3go_coord", &prompt, &out);
            let text = match out {
                Ok(t) => t,
                Err(e) => {
                    backend_error.get_or_insert(e);
                    continue;
                }
            };
            match eval(&text) {
                Ok((program, c)) => {
                    self.records[idx].parsed = json!({ "program": program, "center": vec_json(c) });
                    samples.push(c);
                }
                Err(why) => {
                    self.records[idx].verdict = Some(format!("unusable: {why}"));
                    let retry = format!(
                        "{prompt}\nYour previous program could not be used ({why}). \
                         Reply with the three assignments x = ..., y = ..., z = ... only.\n"
                    );
                    let (idx, text) = self.ask("l3go_coord", &retry, GENERATOR_TEMPERATURE)?;
                    match eval(&text) {
                        Ok((program, c)) => {
                            self.records[idx].parsed = json!({ "program": program, "center": vec_json(c) });
                            samples.push(c);
                        }
                        Err(why) => self.records[idx].verdict = Some(format!("unusable: {why}")),
                    }
                }
            }
        }
        if samples.is_empty() {
            return Err(match backend_error {
                Some(e) => AgentError::Backend(e),
                None => AgentError::AllSamplesUnparsable,
            });
        }
        let center = majority_vote(&samples, &self.cfg.vote).expect("samples nonempty");
        self.push(super::StepRecord {
            step: 0,
            component: "vote".into(),
            prompt_sha256: None,
            prompt: None,
            response: None,
            parsed: json!({
                "samples": samples.iter().map(|s| vec_json(*s)).collect::<Vec<Value>>(),
                "center": vec_json(center),
            }),
            feedback: None,
            verdict: None,
        });
        Ok((spatial, center))
    }

    fn apply_and_critique(&mut self, spec: &PrimitiveSpec, last_attempt: bool) -> Result<Placement, AgentError> {
        let (next, report) = self.scene.apply_action(spec, self.cfg.touch_eps)?;
        let feedback = feedback_text(&report, &next);
        let previous = std::mem::replace(&mut self.scene, next);
        if report.is_clean() {
            self.env_record(spec, Some(feedback), "accepted".into());
            return Ok(Placement::Accepted);
        }
        let flags: Vec<&str> = report.flags.iter().map(|f| f.as_str()).collect();
        let flags = flags.join(", ");
        if self.cfg.ablate_spatial_critic {
            self.env_record(spec, Some(feedback), format!("accepted (spatial critic disabled; flags: {flags})"));
            return Ok(Placement::Accepted);
        }
        if last_attempt {
            self.env_record(spec, Some(feedback), format!("accepted (spatial retry cap reached; flags: {flags})"));
            return Ok(Placement::Accepted);
        }
        // A rejected part is taken back out before the next attempt.
        self.scene = previous;
        self.env_record(spec, Some(feedback.clone()), format!("rejected: {flags}"));
        Ok(Placement::Rejected { feedback })
    }

    fn completion_check(&mut self) -> Result<Completion, AgentError> {
        let parts = self.parts_so_far();
        let prompt = self.render("l3go_completion", &[("parts_so_far", &parts)]);
        let (idx, reply) = self.ask("l3go_completion", &prompt, CRITIC_TEMPERATURE)?;
        let done = parse::completion(&reply);
        self.records[idx].parsed = match done {
            Some(d) => json!({ "done": d }),
            None => Value::Null,
        };
        if self.scene.len() >= self.cfg.max_parts {
            self.records[idx].feedback = Some(format!("part cap of {} reached", self.cfg.max_parts));
            return Ok(Completion::Capped);
        }
        Ok(match done {
            Some(true) => Completion::Done,
            Some(false) => Completion::Continue,
            None => {
                self.records[idx].feedback = Some("completion reply not understood; continuing".into());
                Completion::Continue
            }
        })
    }
}
