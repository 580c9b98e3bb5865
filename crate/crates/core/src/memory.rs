//! Emotion-tagged memory stream.
//!
//! Each agent owns a [`MemoryStore`]: an append-only list of events, chat
//! summaries and reflective thoughts. Every node carries a 1..=10 poignancy
//! and the PAD delta felt when it was recorded. Poignancy accumulates until it
//! passes the reflection threshold, at which point [`run_reflection`]
//! synthesizes insights and a slow emotion update.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{PadDelta, PadState, DEFAULT_DELTA_CAP};
use crate::gateway::{parse_delta_reply, ChatBackend, ChatRequest, GatewayError, TEMPERATURE_SCORING};

pub const DEFAULT_REFLECTION_THRESHOLD: u32 = 150;
pub const DEFAULT_RETRIEVAL_LIMIT: usize = 30;
pub const DEFAULT_FOCUS_QUESTION_CAP: usize = 3;
/// How many of the newest memories seed the focus-question prompt.
const FOCUS_CONTEXT_SIZE: usize = 100;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("poignancy {0} is outside 1..=10")]
    Poignancy(i64),
    #[error("embedding has dimension {got}, store expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("retrieval limit must be at least 1")]
    ZeroLimit,
    #[error("failed to write memory dump: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to serialize memory node: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Event,
    Chat,
    Thought,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryNode {
    pub id: u64,
    pub kind: MemoryKind,
    pub text: String,
    pub created_step: u32,
    pub poignancy: u8,
    pub pad_tag: PadDelta,
    pub embedding: Vec<f64>,
}

/// Input to [`MemoryStore::add_memory`]; the store assigns the id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewMemory {
    pub kind: MemoryKind,
    pub text: String,
    pub created_step: u32,
    pub poignancy: i64,
    pub pad_tag: PadDelta,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddOutcome {
    pub id: u64,
    /// The accumulator is now strictly above the reflection threshold.
    pub triggered: bool,
}

/// Score = rel·cosine + rec·decay^(age in steps) + imp·poignancy/10.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWeights {
    pub relevance: f64,
    pub recency: f64,
    pub importance: f64,
    pub recency_decay: f64,
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        Self {
            relevance: 1.0,
            recency: 1.0,
            importance: 1.0,
            recency_decay: 0.995,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalQuery {
    pub query_text: String,
    pub query_embedding: Vec<f64>,
    pub now_step: u32,
    pub limit: usize,
}

#[derive(Debug, Clone)]
pub struct MemoryStore {
    dim: usize,
    nodes: Vec<MemoryNode>,
    accumulator: u32,
    threshold: u32,
    weights: RetrievalWeights,
    next_id: u64,
    /// Node count at the last completed reflection.
    reflected_upto: usize,
}

impl MemoryStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            nodes: Vec::new(),
            accumulator: 0,
            threshold: DEFAULT_REFLECTION_THRESHOLD,
            weights: RetrievalWeights::default(),
            next_id: 0,
            reflected_upto: 0,
        }
    }

    pub fn with_threshold(mut self, threshold: u32) -> Self {
        self.threshold = threshold.max(1);
        self
    }

    pub fn with_weights(mut self, weights: RetrievalWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[MemoryNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn accumulator(&self) -> u32 {
        self.accumulator
    }

    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    pub fn reflection_due(&self) -> bool {
        self.accumulator > self.threshold
    }

    fn push(&mut self, node: NewMemory) -> Result<u64, MemoryError> {
        if !(1..=10).contains(&node.poignancy) {
            return Err(MemoryError::Poignancy(node.poignancy));
        }
        if node.embedding.len() != self.dim {
            return Err(MemoryError::Dimension {
                expected: self.dim,
                got: node.embedding.len(),
            });
        }
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.push(MemoryNode {
            id,
            kind: node.kind,
            text: node.text,
            created_step: node.created_step,
            poignancy: node.poignancy as u8,
            pad_tag: node.pad_tag,
            embedding: node.embedding,
        });
        Ok(id)
    }

    /// Appends a node and adds its poignancy to the accumulator.
    pub fn add_memory(&mut self, node: NewMemory) -> Result<AddOutcome, MemoryError> {
        let poignancy = node.poignancy;
        let id = self.push(node)?;
        self.accumulator = self.accumulator.saturating_add(poignancy as u32);
        Ok(AddOutcome {
            id,
            triggered: self.reflection_due(),
        })
    }

    pub fn reset_accumulator(&mut self) {
        self.accumulator = 0;
    }

    fn score(&self, node: &MemoryNode, q: &RetrievalQuery) -> f64 {
        let w = &self.weights;
        let age = q.now_step.saturating_sub(node.created_step);
        w.relevance * cosine(&q.query_embedding, &node.embedding)
            + w.recency * w.recency_decay.powi(age as i32)
            + w.importance * f64::from(node.poignancy) / 10.0
    }

    /// Top `limit` nodes by descending score; ties go to the newer node.
    pub fn retrieve(&self, q: &RetrievalQuery) -> Result<Vec<&MemoryNode>, MemoryError> {
        if q.limit == 0 {
            return Err(MemoryError::ZeroLimit);
        }
        if q.query_embedding.len() != self.dim {
            return Err(MemoryError::Dimension {
                expected: self.dim,
                got: q.query_embedding.len(),
            });
        }
        let mut scored: Vec<(f64, &MemoryNode)> =
            self.nodes.iter().map(|n| (self.score(n, q), n)).collect();
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.total_cmp(sa)
                .then(b.created_step.cmp(&a.created_step))
                .then(b.id.cmp(&a.id))
        });
        scored.truncate(q.limit);
        Ok(scored.into_iter().map(|(_, n)| n).collect())
    }

    /// Newest `n` nodes, oldest first.
    pub fn recent(&self, n: usize) -> &[MemoryNode] {
        &self.nodes[self.nodes.len().saturating_sub(n)..]
    }

    /// Chat nodes recorded since the last completed reflection.
    pub fn chats_since_reflection(&self) -> impl Iterator<Item = &MemoryNode> {
        self.nodes[self.reflected_upto.min(self.nodes.len())..]
            .iter()
            .filter(|n| n.kind == MemoryKind::Chat)
    }

    /// One JSON object per line; embeddings only when asked for.
    pub fn write_jsonl<W: Write>(&self, mut out: W, include_embeddings: bool) -> Result<(), MemoryError> {
        #[derive(Serialize)]
        struct Row<'a> {
            id: u64,
            kind: MemoryKind,
            text: &'a str,
            created_step: u32,
            poignancy: u8,
            pad_tag: PadDelta,
            #[serde(skip_serializing_if = "Option::is_none")]
            embedding: Option<&'a [f64]>,
        }
        for n in &self.nodes {
            let row = Row {
                id: n.id,
                kind: n.kind,
                text: &n.text,
                created_step: n.created_step,
                poignancy: n.poignancy,
                pad_tag: n.pad_tag,
                embedding: include_embeddings.then_some(n.embedding.as_slice()),
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionConfig {
    pub focus_question_cap: usize,
    pub retrieval_limit: usize,
    pub delta_cap: f64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        Self {
            focus_question_cap: DEFAULT_FOCUS_QUESTION_CAP,
            retrieval_limit: DEFAULT_RETRIEVAL_LIMIT,
            delta_cap: DEFAULT_DELTA_CAP,
        }
    }
}

/// Who is reflecting.
#[derive(Debug, Clone, Copy)]
pub struct Reflector<'a> {
    pub name: &'a str,
    pub profile: &'a str,
    pub pad: PadState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionOutcome {
    pub focus_questions: Vec<String>,
    /// Ids of the Thought nodes appended to the store.
    pub insight_ids: Vec<u64>,
    pub slow_delta: PadDelta,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ReflectionError {
    #[error("reflection aborted at {stage}: {source}")]
    Gateway {
        stage: &'static str,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Insight {
    pub text: String,
    pub poignancy: u8,
}

/// Parses `[7] insight text` lines. Out-of-range or unreadable ratings are
/// clamped into 1..=10 with a warning.
pub fn parse_insights(text: &str, warnings: &mut Vec<String>) -> Vec<Insight> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = strip_list_marker(line.trim());
        if line.is_empty() {
            continue;
        }
        let (rating, body) = match line.strip_prefix('[').and_then(|rest| rest.split_once(']')) {
            Some((rating, body)) => (Some(rating.trim()), body.trim()),
            None => (None, line),
        };
        if body.is_empty() {
            continue;
        }
        let poignancy = match rating.map(|r| r.parse::<f64>()) {
            Some(Ok(v)) if v.is_finite() => {
                let clamped = v.round().clamp(1.0, 10.0);
                if clamped != v {
                    warnings.push(format!("insight poignancy {v} clamped to {clamped}"));
                }
                clamped as u8
            }
            other => {
                let shown = match other {
                    Some(_) => rating.unwrap_or_default().to_string(),
                    None => "missing".into(),
                };
                warnings.push(format!("insight poignancy {shown:?} unreadable; using 1"));
                1
            }
        };
        out.push(Insight {
            text: body.to_string(),
            poignancy,
        });
    }
    out
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return rest.trim_start();
        }
    }
    line
}

pub fn parse_focus_questions(text: &str, cap: usize) -> Vec<String> {
    text.lines()
        .map(|l| strip_list_marker(l.trim()).trim().to_string())
        .filter(|l| !l.is_empty())
        .take(cap)
        .collect()
}

fn bullet_list<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    let lines: Vec<String> = items.into_iter().map(|t| format!("- {t}")).collect();
    if lines.is_empty() {
        "none".to_string()
    } else {
        lines.join("\n")
    }
}

const INSIGHT_FORMAT: &str = "Answer with one insight per line, each prefixed by its poignancy on a \
1-10 scale in square brackets, for example `[7] <insight>`. 1 is mundane, 10 is life-changing.";

/// Runs the reflection pipeline: focus questions, per-question retrieval,
/// insight synthesis, takeaways from recent chats, and the slow PAD update.
///
/// Any gateway failure aborts without touching the store, so the accumulator
/// stays armed for the next attempt. On success the insights are appended as
/// Thought nodes and the accumulator is reset.
pub fn run_reflection(
    store: &mut MemoryStore,
    who: Reflector<'_>,
    backend: &dyn ChatBackend,
    cfg: &ReflectionConfig,
    now_step: u32,
) -> Result<ReflectionOutcome, ReflectionError> {
    let gateway = |stage: &'static str| move |source| ReflectionError::Gateway { stage, source };
    let mut warnings = Vec::new();

    let recent = bullet_list(store.recent(FOCUS_CONTEXT_SIZE).iter().map(|n| n.text.as_str()));
    let req = ChatRequest::new(
        "focus_questions",
        format!("You are the inner voice of {}.", who.name),
        format!(
            "Recent memories of {name}:\n{recent}\n\nGiven only the information above, what are the \
             {cap} most salient high-level questions {name} could answer about their situation? \
             One question per line.",
            name = who.name,
            cap = cfg.focus_question_cap
        ),
    )
    .temperature(TEMPERATURE_SCORING)
    .bind("name", who.name);
    let reply = backend.send(&req).map_err(gateway("focus questions"))?;
    let questions = parse_focus_questions(&reply.text, cfg.focus_question_cap);

    let mut insights: Vec<Insight> = Vec::new();
    for question in &questions {
        let query = RetrievalQuery {
            query_text: question.clone(),
            query_embedding: backend.embed(question),
            now_step,
            limit: cfg.retrieval_limit,
        };
        let evidence: Vec<String> = store
            .retrieve(&query)?
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{}. {}", i + 1, n.text))
            .collect();
        let req = ChatRequest::new(
            "insights",
            format!("You are the inner voice of {}.", who.name),
            format!(
                "Focus question: {question}\n\nStatements about {name}:\n{evidence}\n\nWhat high-level \
                 insights can you infer from the statements above? {INSIGHT_FORMAT}",
                name = who.name,
                evidence = if evidence.is_empty() { "none".to_string() } else { evidence.join("\n") },
            ),
        )
        .temperature(TEMPERATURE_SCORING)
        .bind("name", who.name);
        let reply = backend.send(&req).map_err(gateway("insight synthesis"))?;
        insights.extend(parse_insights(&reply.text, &mut warnings));
    }

    let chats: Vec<&str> = store.chats_since_reflection().map(|n| n.text.as_str()).collect();
    if !chats.is_empty() {
        let req = ChatRequest::new(
            "chat_takeaways",
            format!("You are the inner voice of {}.", who.name),
            format!(
                "Recent conversations of {name}:\n{chats}\n\nWhat planning-relevant facts and memorable \
                 moments should {name} remember from these conversations? {INSIGHT_FORMAT}",
                name = who.name,
                chats = bullet_list(chats.iter().copied()),
            ),
        )
        .temperature(TEMPERATURE_SCORING)
        .bind("name", who.name);
        let reply = backend.send(&req).map_err(gateway("chat takeaways"))?;
        insights.extend(parse_insights(&reply.text, &mut warnings));
    }

    let slow_delta = if insights.is_empty() {
        PadDelta::ZERO
    } else {
        let req = ChatRequest::new(
            "reflection_delta",
            "You model how a person's emotional state shifts after reflecting on their day.",
            format!(
                "Profile:\n{profile}\n\nCurrent PAD state: P={p:+.2}, A={a:+.2}, D={d:+.2}\n\n\
                 New insights:\n{insights}\n\nHow would {name} appraise these insights given their \
                 personality, values and situation? Reply with exactly one line in the form\n\
                 {name}: (<dP>, <dA>, <dD>)\nwith signed changes between -{cap} and +{cap}.",
                profile = who.profile,
                p = who.pad.p,
                a = who.pad.a,
                d = who.pad.d,
                insights = bullet_list(insights.iter().map(|i| i.text.as_str())),
                name = who.name,
                cap = cfg.delta_cap,
            ),
        )
        .temperature(TEMPERATURE_SCORING)
        .bind("name", who.name);
        let reply = backend.send(&req).map_err(gateway("slow emotion update"))?;
        match parse_delta_reply(&reply.text, &[who.name], cfg.delta_cap) {
            Ok(parsed) => {
                warnings.extend(parsed.warnings.iter().cloned());
                parsed.deltas[0].1
            }
            Err(e) => {
                warnings.push(format!("slow update unparsable ({e}); treating as neutral"));
                PadDelta::ZERO
            }
        }
    };

    let mut insight_ids = Vec::with_capacity(insights.len());
    for insight in insights {
        let embedding = backend.embed(&insight.text);
        insight_ids.push(store.push(NewMemory {
            kind: MemoryKind::Thought,
            text: insight.text,
            created_step: now_step,
            poignancy: i64::from(insight.poignancy),
            pad_tag: slow_delta,
            embedding,
        })?);
    }
    store.reset_accumulator();
    store.reflected_upto = store.nodes.len();
    for w in &warnings {
        log::warn!("reflection for {}: {w}", who.name);
    }
    Ok(ReflectionOutcome {
        focus_questions: questions,
        insight_ids,
        slow_delta,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{hashed_embedding, ScriptEntry, ScriptedBackend};

    fn node(kind: MemoryKind, text: &str, step: u32, poignancy: i64, embedding: Vec<f64>) -> NewMemory {
        NewMemory {
            kind,
            text: text.to_string(),
            created_step: step,
            poignancy,
            pad_tag: PadDelta::ZERO,
            embedding,
        }
    }

    fn event(poignancy: i64) -> NewMemory {
        node(MemoryKind::Event, "something happened", 0, poignancy, vec![1.0, 0.0])
    }

    #[test]
    fn trigger_fires_strictly_above_threshold() {
        let mut store = MemoryStore::new(2);
        for _ in 0..14 {
            assert!(!store.add_memory(event(10)).unwrap().triggered);
        }
        assert!(!store.add_memory(event(5)).unwrap().triggered);
        assert_eq!(store.accumulator(), 145);
        let out = store.add_memory(event(10)).unwrap();
        assert!(out.triggered);
        assert_eq!(store.accumulator(), 155);

        let mut store = MemoryStore::new(2);
        for _ in 0..15 {
            store.add_memory(event(10)).unwrap();
        }
        assert_eq!(store.accumulator(), 150);
        assert!(!store.reflection_due());
    }

    #[test]
    fn add_validates_poignancy_and_dimension() {
        let mut store = MemoryStore::new(2);
        let out = store.add_memory(event(1)).unwrap();
        assert_eq!((out.id, out.triggered, store.accumulator()), (0, false, 1));
        assert!(matches!(store.add_memory(event(0)), Err(MemoryError::Poignancy(0))));
        assert!(matches!(store.add_memory(event(11)), Err(MemoryError::Poignancy(11))));
        let bad = node(MemoryKind::Event, "x", 0, 3, vec![1.0]);
        assert!(matches!(store.add_memory(bad), Err(MemoryError::Dimension { expected: 2, got: 1 })));
        assert_eq!(store.len(), 1);
        assert_eq!(store.accumulator(), 1);
    }

    #[test]
    fn reset_leaves_nodes_alone() {
        let mut store = MemoryStore::new(2);
        for _ in 0..16 {
            store.add_memory(event(10)).unwrap();
        }
        store.add_memory(event(5)).unwrap();
        assert_eq!(store.accumulator(), 165);
        store.reset_accumulator();
        assert_eq!(store.accumulator(), 0);
        store.reset_accumulator();
        assert_eq!(store.accumulator(), 0);
        assert_eq!(store.len(), 17);
    }

    fn query(embedding: Vec<f64>, now: u32, limit: usize) -> RetrievalQuery {
        RetrievalQuery {
            query_text: String::new(),
            query_embedding: embedding,
            now_step: now,
            limit,
        }
    }

    #[test]
    fn retrieval_basics() {
        let mut store = MemoryStore::new(2);
        store.add_memory(node(MemoryKind::Event, "only", 0, 3, vec![1.0, 0.0])).unwrap();
        let got = store.retrieve(&query(vec![0.0, 1.0], 5, 30)).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].text, "only");

        store.add_memory(node(MemoryKind::Event, "newer", 4, 3, vec![1.0, 0.0])).unwrap();
        let got = store.retrieve(&query(vec![1.0, 0.0], 5, 30)).unwrap();
        assert_eq!(got[0].text, "newer");

        assert!(matches!(store.retrieve(&query(vec![1.0], 5, 3)), Err(MemoryError::Dimension { .. })));
        assert!(matches!(store.retrieve(&query(vec![1.0, 0.0], 5, 0)), Err(MemoryError::ZeroLimit)));
    }

    #[test]
    fn relevance_only_prefers_parallel_embedding() {
        // cos((1,1),(2,2)) = 1; cos((1,1),(1,-1)) = 0.
        let weights = RetrievalWeights {
            relevance: 1.0,
            recency: 0.0,
            importance: 0.0,
            recency_decay: 0.995,
        };
        let mut store = MemoryStore::new(2).with_weights(weights);
        store.add_memory(node(MemoryKind::Event, "orthogonal", 3, 9, vec![1.0, -1.0])).unwrap();
        store.add_memory(node(MemoryKind::Event, "parallel", 0, 1, vec![2.0, 2.0])).unwrap();
        let got = store.retrieve(&query(vec![1.0, 1.0], 3, 2)).unwrap();
        assert_eq!(got[0].text, "parallel");
        assert_eq!(got[1].text, "orthogonal");
    }

    #[test]
    fn dump_omits_embeddings_unless_asked() {
        let mut store = MemoryStore::new(2);
        store.add_memory(event(4)).unwrap();
        let mut plain = Vec::new();
        store.write_jsonl(&mut plain, false).unwrap();
        let plain = String::from_utf8(plain).unwrap();
        assert!(!plain.contains("embedding"));
        assert!(plain.contains("\"kind\":\"event\""));
        let mut full = Vec::new();
        store.write_jsonl(&mut full, true).unwrap();
        assert!(String::from_utf8(full).unwrap().contains("\"embedding\":[1.0,0.0]"));
    }

    #[test]
    fn insight_parsing_clamps_ratings() {
        let mut warnings = Vec::new();
        let text = "1. [7] First insight\n- [15] Too poignant\n[x] Unreadable\nNo bracket at all\n\n";
        let got = parse_insights(text, &mut warnings);
        let ratings: Vec<u8> = got.iter().map(|i| i.poignancy).collect();
        assert_eq!(ratings, vec![7, 10, 1, 1]);
        assert_eq!(got[0].text, "First insight");
        assert_eq!(warnings.len(), 3);
    }

    #[test]
    fn focus_questions_are_capped() {
        let text = "1. One?\n2. Two?\n3. Three?\n4. Four?";
        assert_eq!(parse_focus_questions(text, 3), vec!["One?", "Two?", "Three?"]);
    }

    fn store_with_history() -> MemoryStore {
        let mut store = MemoryStore::new(crate::gateway::EMBEDDING_DIM);
        for (i, text) in ["Tom opened the store", "Tom chatted with John about Sam Moore"]
            .iter()
            .enumerate()
        {
            store
                .add_memory(node(MemoryKind::Event, text, i as u32, 5, hashed_embedding(text, 64)))
                .unwrap();
        }
        store
    }

    fn reflector() -> Reflector<'static> {
        Reflector {
            name: "Tom Moreno",
            profile: "Tom Moreno runs the grocery counter.",
            pad: PadState::new(0.79, 0.58, 0.79),
        }
    }

    #[test]
    fn zero_insights_give_zero_delta() {
        let backend = ScriptedBackend::new([
            ScriptEntry::reply("focus_questions", 0, "1. What matters?"),
            ScriptEntry::reply("insights", 0, ""),
        ]);
        let mut store = store_with_history();
        let before = store.len();
        let out = run_reflection(&mut store, reflector(), &backend, &ReflectionConfig::default(), 9).unwrap();
        assert!(out.insight_ids.is_empty());
        assert_eq!(out.slow_delta, PadDelta::ZERO);
        assert_eq!(store.len(), before);
        assert!(!backend.call_counts().contains_key("reflection_delta"));
    }

    #[test]
    fn gateway_failure_keeps_accumulator() {
        let backend = ScriptedBackend::new([
            ScriptEntry::reply("focus_questions", 0, "1. What matters?"),
            ScriptEntry::failure("insights", 0, "timeout"),
        ]);
        let mut store = store_with_history();
        let before = (store.len(), store.accumulator());
        let err = run_reflection(&mut store, reflector(), &backend, &ReflectionConfig::default(), 9);
        assert!(matches!(err, Err(ReflectionError::Gateway { stage: "insight synthesis", .. })));
        assert_eq!((store.len(), store.accumulator()), before);
    }
}
