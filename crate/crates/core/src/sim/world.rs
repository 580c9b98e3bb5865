use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::config::{SimConfig, START_TIME_FORMAT};
use super::persona::AgentProfile;
use super::prompts::{self, UtteranceContext};
use super::snapshot::{write_snapshot_line, RelationshipSnapshot, SnapshotEdge};
use super::SimError;
use crate::emotion::{apply_delta, clamp_delta, decay, PadDelta, PadState};
use crate::enrichment::AnchorSet;
use crate::gateway::{parse_delta_reply, ChatBackend, ChatRequest, DeltaReply};
use crate::memory::{
    run_reflection, MemoryKind, MemoryStore, NewMemory, ReflectionConfig, Reflector, RetrievalQuery,
};

pub struct Agent {
    pub profile: AgentProfile,
    pub pad: PadState,
    pub location: String,
    pub memory: MemoryStore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub text: String,
}

/// One exchange: up to one line from each participant, then both deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub utterances: Vec<Utterance>,
    pub deltas: DeltaReply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationRecord {
    pub step: u32,
    /// Agent ids, initiator first.
    pub participants: [String; 2],
    pub location: String,
    pub rounds: Vec<Round>,
    pub summary: String,
    pub pad_before: [PadState; 2],
    pub pad_after: [PadState; 2],
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub step: u32,
    pub conversations: Vec<ConversationRecord>,
    /// `(src, dst, applied delta)` per probe, in application order.
    pub probes: Vec<(String, String, f64)>,
    /// Agent id and slow delta of each completed reflection.
    pub reflections: Vec<(String, PadDelta)>,
    pub snapshot: Option<RelationshipSnapshot>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub steps: u32,
    pub conversations: usize,
    pub snapshots: usize,
    pub reflections: usize,
}

pub struct World {
    config: SimConfig,
    agents: Vec<Agent>,
    locations: Vec<String>,
    backend: Arc<dyn ChatBackend>,
    anchors: AnchorSet,
    rng: ChaCha8Rng,
    relationships: BTreeMap<(String, String), f64>,
    step: u32,
}

fn warn(warnings: &mut Vec<String>, msg: String) {
    log::warn!("{msg}");
    warnings.push(msg);
}

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[+-]?(?:\d+\.?\d*|\.\d+)").expect("valid number regex"))
}

/// First signed number in a probe reply, clipped to `[-cap, cap]`.
pub fn parse_probe_delta(text: &str, cap: f64) -> Option<f64> {
    let v: f64 = number_pattern().find(text)?.as_str().parse().ok()?;
    v.is_finite().then(|| v.clamp(-cap, cap))
}

fn parse_poignancy(text: &str) -> Option<i64> {
    let m = number_pattern().find(text)?;
    let v: f64 = m.as_str().parse().ok()?;
    v.is_finite().then(|| (v.round() as i64).clamp(1, 10))
}

fn is_yes(text: &str) -> bool {
    text.trim_start()
        .get(..3)
        .is_some_and(|s| s.eq_ignore_ascii_case("yes"))
}

impl World {
    /// Builds the population from the first `n_agents` profiles. Agents are
    /// kept sorted by id, which fixes every iteration order in the step loop.
    pub fn new(
        config: SimConfig,
        personas: Vec<AgentProfile>,
        backend: Arc<dyn ChatBackend>,
    ) -> Result<Self, SimError> {
        config.validate()?;
        if personas.len() < config.n_agents {
            return Err(SimError::Config(format!(
                "n_agents is {} but only {} personas were supplied",
                config.n_agents,
                personas.len()
            )));
        }
        let dim = backend.embed("").len();
        let mut profiles: Vec<AgentProfile> = personas.into_iter().take(config.n_agents).collect();
        profiles.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = profiles.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(SimError::Config(format!("duplicate agent id {:?}", w[0].id)));
        }

        let mut locations = config.locations.clone();
        for p in &profiles {
            if !locations.contains(&p.home_location) {
                locations.push(p.home_location.clone());
            }
        }
        let agents = profiles
            .into_iter()
            .map(|profile| Agent {
                pad: profile.initial_pad.unwrap_or(PadState::NEUTRAL),
                location: profile.home_location.clone(),
                memory: MemoryStore::new(dim)
                    .with_threshold(config.reflection_threshold)
                    .with_weights(config.retrieval),
                profile,
            })
            .collect();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            config,
            agents,
            locations,
            backend,
            anchors: AnchorSet::synthetic(),
            relationships: BTreeMap::new(),
            step: 0,
        })
    }

    pub fn with_anchors(mut self, anchors: AnchorSet) -> Self {
        self.anchors = anchors;
        self
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, id: &str) -> Option<&Agent> {
        self.agents.iter().find(|a| a.profile.id == id)
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    /// Directed weights keyed by `(src, dst)`.
    pub fn relationships(&self) -> &BTreeMap<(String, String), f64> {
        &self.relationships
    }

    /// Index of the next step to run.
    pub fn current_step(&self) -> u32 {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.n_steps
    }

    pub fn snapshot(&self) -> RelationshipSnapshot {
        RelationshipSnapshot {
            step: self.step,
            edges: self
                .relationships
                .iter()
                .map(|((src, dst), w)| SnapshotEdge {
                    src: src.clone(),
                    dst: dst.clone(),
                    weight: *w,
                })
                .collect(),
        }
    }

    fn send(&self, req: &ChatRequest) -> Result<String, String> {
        self.backend
            .send(req)
            .map(|r| r.text)
            .map_err(|e| format!("{} call failed: {e}", req.tag))
    }

    pub fn step(&mut self) -> Result<StepReport, SimError> {
        if self.is_finished() {
            return Err(SimError::Finished(self.config.n_steps));
        }
        let t = self.step;
        let mut report = StepReport { step: t, ..Default::default() };

        // No time has elapsed before the first step.
        let elapsed = if t == 0 { 0.0 } else { self.config.step_minutes };
        for agent in &mut self.agents {
            agent.pad = decay(agent.pad, elapsed, &self.config.decay)
                .map_err(|e| SimError::Config(e.to_string()))?;
        }

        self.move_agents();
        let pairs = self.initiate(t, &mut report.warnings);

        for &(i, j) in &pairs {
            if let Some(rec) = self.run_conversation(i, j, t, &mut report.warnings) {
                report.conversations.push(rec);
            }
        }

        for rec in &report.conversations {
            let [a, b] = &rec.participants;
            for (src, dst) in [(a, b), (b, a)] {
                let delta = self.relationship_probe(src, dst, &rec.summary, &mut report.warnings);
                report.probes.push((src.clone(), dst.clone(), delta));
            }
        }

        self.reflect(t, &mut report);

        if t.is_multiple_of(self.config.snapshot_every_steps) {
            report.snapshot = Some(self.snapshot());
        }
        self.step += 1;
        Ok(report)
    }

    fn move_agents(&mut self) {
        if self.locations.is_empty() {
            return;
        }
        for agent in &mut self.agents {
            let roll: f64 = self.rng.random();
            if roll < self.config.move_probability {
                let k = self.rng.random_range(0..self.locations.len());
                agent.location = self.locations[k].clone();
            }
        }
    }

    /// Greedy pairing over co-located agents in id order; each agent joins
    /// at most one conversation per step.
    fn initiate(&mut self, t: u32, warnings: &mut Vec<String>) -> Vec<(usize, usize)> {
        let time = self.config.time_at(t).format(START_TIME_FORMAT).to_string();
        let n = self.agents.len();
        let mut engaged = vec![false; n];
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if engaged[i] || engaged[j] || self.agents[i].location != self.agents[j].location {
                    continue;
                }
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let w = self
                    .relationships
                    .get(&(a.profile.id.clone(), b.profile.id.clone()))
                    .copied()
                    .unwrap_or(0.0);
                let req = prompts::initiate(&a.profile, &b.profile, w, &a.location, &time);
                match self.send(&req) {
                    Ok(reply) if is_yes(&reply) => {
                        engaged[i] = true;
                        engaged[j] = true;
                        pairs.push((i, j));
                    }
                    Ok(_) => {}
                    Err(e) => warn(warnings, e),
                }
            }
        }
        pairs
    }

    fn recall(&self, idx: usize, query: &str, now: u32) -> Vec<String> {
        let limit = self.config.conversation_memory_limit;
        let store = &self.agents[idx].memory;
        if limit == 0 || store.is_empty() {
            return Vec::new();
        }
        let q = RetrievalQuery {
            query_text: query.to_string(),
            query_embedding: self.backend.embed(query),
            now_step: now,
            limit,
        };
        store
            .retrieve(&q)
            .map(|nodes| nodes.into_iter().map(|n| n.text.clone()).collect())
            .unwrap_or_default()
    }

    fn enrichment_paragraph(&self, idx: usize, warnings: &mut Vec<String>) -> String {
        let agent = &self.agents[idx];
        let labels = self.anchors.knn_labels(&agent.pad);
        let memories = agent
            .memory
            .recent(self.config.conversation_memory_limit)
            .iter()
            .map(|n| n.text.clone())
            .collect();
        let req = prompts::enrich(&agent.profile, labels.clone(), agent.pad, memories);
        match self.send(&req) {
            Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
            Ok(_) => prompts::fallback_paragraph(&agent.profile.name, &labels),
            Err(e) => {
                warn(warnings, e);
                prompts::fallback_paragraph(&agent.profile.name, &labels)
            }
        }
    }

    /// Runs one two-party conversation, applying each round's deltas as soon
    /// as they arrive. Returns `None` if nothing was said.
    fn run_conversation(
        &mut self,
        i: usize,
        j: usize,
        t: u32,
        warnings: &mut Vec<String>,
    ) -> Option<ConversationRecord> {
        let location = self.agents[i].location.clone();
        let pad_before = [self.agents[i].pad, self.agents[j].pad];
        let names = [self.agents[i].profile.name.clone(), self.agents[j].profile.name.clone()];
        let paragraphs = [
            self.enrichment_paragraph(i, warnings),
            self.enrichment_paragraph(j, warnings),
        ];

        let mut history: Vec<(String, String)> = Vec::new();
        let mut rounds = Vec::new();
        let mut totals = [PadDelta::ZERO; 2];
        'rounds: for r in 0..self.config.conversation_rounds_max {
            let mut exchange: Vec<(String, String)> = Vec::new();
            let mut stop = false;
            for (s, l, side) in [(i, j, 0), (j, i, 1)] {
                let last = exchange.last().or(history.last()).map(|(_, x)| x.as_str()).unwrap_or("");
                let query = format!("{} {last}", names[1 - side]);
                let memories = self.recall(s, &query, t);
                let mut seen = history.clone();
                seen.extend(exchange.iter().cloned());
                let req = prompts::utterance(UtteranceContext {
                    speaker: &self.agents[s].profile,
                    listener: &self.agents[l].profile,
                    paragraph: &paragraphs[side],
                    memories,
                    location: &location,
                    history: &seen,
                    round: r,
                });
                match self.send(&req) {
                    Ok(text) if !text.trim().is_empty() => {
                        exchange.push((names[side].clone(), text.trim().to_string()));
                    }
                    Ok(_) => {
                        stop = true;
                        break;
                    }
                    Err(e) => {
                        warn(warnings, e);
                        stop = true;
                        break;
                    }
                }
            }
            if exchange.is_empty() {
                break 'rounds;
            }

            let req = prompts::round_delta(
                &self.agents[i].profile,
                &self.agents[j].profile,
                (self.agents[i].pad, self.agents[j].pad),
                &exchange,
                self.config.delta_cap,
            );
            let participants = [names[0].as_str(), names[1].as_str()];
            let deltas = match self.send(&req) {
                Ok(text) => match parse_delta_reply(&text, &participants, self.config.delta_cap) {
                    Ok(d) => d,
                    Err(e) => {
                        warn(warnings, format!("round {} delta for {} and {}: {e}; treating as neutral", r + 1, names[0], names[1]));
                        DeltaReply::neutral(&participants)
                    }
                },
                Err(e) => {
                    warn(warnings, format!("{e}; treating round as neutral"));
                    DeltaReply::neutral(&participants)
                }
            };
            for (side, idx) in [(0, i), (1, j)] {
                let d = deltas.deltas[side].1;
                self.agents[idx].pad = apply_delta(self.agents[idx].pad, d);
                totals[side] = totals[side] + d;
            }
            rounds.push(Round {
                utterances: exchange
                    .iter()
                    .map(|(speaker, text)| Utterance { speaker: speaker.clone(), text: text.clone() })
                    .collect(),
                deltas,
            });
            history.extend(exchange);
            if stop {
                break;
            }
        }
        if rounds.is_empty() {
            warn(warnings, format!("conversation between {} and {} cancelled", names[0], names[1]));
            return None;
        }

        let req = prompts::summary(&self.agents[i].profile, &self.agents[j].profile, &history);
        let summary = match self.send(&req) {
            Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
            other => {
                if let Err(e) = other {
                    warn(warnings, e);
                }
                format!("{} and {} talked at {}.", names[0], names[1], location)
            }
        };

        for (side, idx) in [(0, i), (1, j)] {
            let req = prompts::poignancy(&self.agents[idx].profile, &summary);
            let poignancy = match self.send(&req) {
                Ok(text) => parse_poignancy(&text).unwrap_or_else(|| {
                    warn(warnings, format!("unreadable poignancy {text:?} for {}; using 1", names[side]));
                    1
                }),
                Err(e) => {
                    warn(warnings, format!("{e}; using poignancy 1"));
                    1
                }
            };
            let t_delta = totals[side];
            let pad_tag = clamp_delta((t_delta.dp, t_delta.da, t_delta.dd), self.config.delta_cap)
                .unwrap_or(PadDelta::ZERO);
            let embedding = self.backend.embed(&summary);
            let added = self.agents[idx].memory.add_memory(NewMemory {
                kind: MemoryKind::Chat,
                text: summary.clone(),
                created_step: t,
                poignancy,
                pad_tag,
                embedding,
            });
            if let Err(e) = added {
                warn(warnings, format!("could not store chat memory for {}: {e}", names[side]));
            }
        }

        Some(ConversationRecord {
            step: t,
            participants: [self.agents[i].profile.id.clone(), self.agents[j].profile.id.clone()],
            location,
            rounds,
            summary,
            pad_before,
            pad_after: [self.agents[i].pad, self.agents[j].pad],
        })
    }

    /// Asks `src` for a signed change to its regard for `dst` and applies it.
    /// The edge exists from this point on even when the change is zero.
    fn relationship_probe(&mut self, src: &str, dst: &str, summary: &str, warnings: &mut Vec<String>) -> f64 {
        let cap = self.config.probe_delta_cap;
        let key = (src.to_string(), dst.to_string());
        let current = self.relationships.get(&key).copied().unwrap_or(0.0);
        let (Some(s), Some(d)) = (self.agent(src), self.agent(dst)) else {
            return 0.0;
        };
        let req = prompts::probe(&s.profile, &d.profile, current, summary, cap);
        let delta = match self.send(&req) {
            Ok(text) => parse_probe_delta(&text, cap).unwrap_or_else(|| {
                warn(warnings, format!("unparsable probe {text:?} for {src}->{dst}; using 0"));
                0.0
            }),
            Err(e) => {
                warn(warnings, format!("{e}; using 0"));
                0.0
            }
        };
        self.relationships.insert(key, (current + delta).clamp(-1.0, 1.0));
        delta
    }

    fn reflect(&mut self, t: u32, report: &mut StepReport) {
        let cfg = ReflectionConfig {
            focus_question_cap: self.config.focus_question_cap,
            retrieval_limit: self.config.retrieval_limit,
            delta_cap: self.config.delta_cap,
        };
        let backend = Arc::clone(&self.backend);
        for agent in &mut self.agents {
            if !agent.memory.reflection_due() {
                continue;
            }
            let who = Reflector {
                name: &agent.profile.name,
                profile: &agent.profile.persona_text,
                pad: agent.pad,
            };
            match run_reflection(&mut agent.memory, who, backend.as_ref(), &cfg, t) {
                Ok(outcome) => {
                    agent.pad = apply_delta(agent.pad, outcome.slow_delta);
                    report.warnings.extend(outcome.warnings);
                    report.reflections.push((agent.profile.id.clone(), outcome.slow_delta));
                }
                Err(e) => warn(
                    &mut report.warnings,
                    format!("reflection for {} deferred: {e}", agent.profile.name),
                ),
            }
        }
    }

    /// Runs every remaining step, streaming transcripts and snapshots.
    /// Any write failure aborts the run.
    pub fn run<S: Write, T: Write>(&mut self, snapshots: &mut S, transcripts: &mut T) -> Result<RunSummary, SimError> {
        let mut summary = RunSummary::default();
        while !self.is_finished() {
            let report = self.step()?;
            for rec in &report.conversations {
                let line = serde_json::to_string(rec).expect("record serializes");
                writeln!(transcripts, "{line}").map_err(|source| SimError::Io { what: "transcripts", source })?;
            }
            if let Some(snap) = &report.snapshot {
                write_snapshot_line(snapshots, snap).map_err(|source| SimError::Io { what: "snapshots", source })?;
                summary.snapshots += 1;
            }
            summary.steps += 1;
            summary.conversations += report.conversations.len();
            summary.reflections += report.reflections.len();
        }
        snapshots.flush().map_err(|source| SimError::Io { what: "snapshots", source })?;
        transcripts.flush().map_err(|source| SimError::Io { what: "transcripts", source })?;
        Ok(summary)
    }
}
