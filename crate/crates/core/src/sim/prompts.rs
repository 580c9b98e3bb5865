//! Request builders for every gateway call the step loop makes. Each request
//! carries a tag and name bindings so scripted backends can key on them.

use crate::emotion::PadState;
use crate::enrichment::{build_enrichment_prompt, EmotionLabel, EnrichmentRequest};
use crate::gateway::{ChatRequest, TEMPERATURE_CREATIVE, TEMPERATURE_SCORING};

use super::persona::AgentProfile;

pub(crate) const TAG_INITIATE: &str = "initiate";
pub(crate) const TAG_ENRICH: &str = "enrich";
pub(crate) const TAG_UTTERANCE: &str = "utterance";
pub(crate) const TAG_ROUND_DELTA: &str = "round_delta";
pub(crate) const TAG_SUMMARY: &str = "chat_summary";
pub(crate) const TAG_POIGNANCY: &str = "poignancy";
pub(crate) const TAG_PROBE: &str = "probe";

fn bullets(items: &[String]) -> String {
    if items.is_empty() {
        return "none".into();
    }
    items.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
}

pub(crate) fn initiate(
    a: &AgentProfile,
    b: &AgentProfile,
    weight_ab: f64,
    location: &str,
    time: &str,
) -> ChatRequest {
    ChatRequest::new(
        TAG_INITIATE,
        "You decide whether two townspeople start a conversation. Answer yes or no.",
        format!(
            "It is {time} at {location}.\n{a_name}: {a_text}\n{b_name}: {b_text}\n\
             {a_name}'s current regard for {b_name}: {weight_ab:+.2} (from -1 to 1).\n\
             Does {a_name} start a conversation with {b_name}? Answer yes or no.",
            a_name = a.name,
            a_text = a.persona_text,
            b_name = b.name,
            b_text = b.persona_text,
        ),
    )
    .temperature(TEMPERATURE_SCORING)
    .max_tokens(8)
    .bind("a", &a.name)
    .bind("b", &b.name)
    .bind("location", location)
}

pub(crate) fn enrich(
    who: &AgentProfile,
    labels: Vec<EmotionLabel>,
    pad: PadState,
    memories: Vec<String>,
) -> ChatRequest {
    let user = build_enrichment_prompt(&EnrichmentRequest {
        labels,
        profile_text: format!("{}. {}", who.name, who.persona_text),
        recent_memory_texts: memories,
        pad,
    });
    ChatRequest::new(TAG_ENRICH, "You describe a character's inner emotional state.", user)
        .temperature(TEMPERATURE_CREATIVE)
        .max_tokens(300)
        .bind("name", &who.name)
}

/// Local stand-in used when the enrichment call fails.
pub(crate) fn fallback_paragraph(name: &str, labels: &[EmotionLabel]) -> String {
    let names: Vec<&str> = labels.iter().map(EmotionLabel::as_str).collect();
    format!("{name} currently feels a mix of {}.", names.join(", "))
}

pub(crate) struct UtteranceContext<'a> {
    pub speaker: &'a AgentProfile,
    pub listener: &'a AgentProfile,
    pub paragraph: &'a str,
    pub memories: Vec<String>,
    pub location: &'a str,
    pub history: &'a [(String, String)],
    pub round: usize,
}

pub(crate) fn utterance(ctx: UtteranceContext<'_>) -> ChatRequest {
    let history = if ctx.history.is_empty() {
        "(the conversation has not started)".to_string()
    } else {
        ctx.history
            .iter()
            .map(|(who, text)| format!("{who}: {text}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    ChatRequest::new(
        TAG_UTTERANCE,
        format!(
            "You are {}. {}\n\nHow you feel right now: {}\n\nRelevant memories:\n{}",
            ctx.speaker.name,
            ctx.speaker.persona_text,
            ctx.paragraph,
            bullets(&ctx.memories)
        ),
        format!(
            "You are talking with {} at {}.\nConversation so far:\n{}\n\n\
             Reply with your next line only, in character. Reply with an empty line to end the conversation.",
            ctx.listener.name, ctx.location, history
        ),
    )
    .temperature(TEMPERATURE_CREATIVE)
    .max_tokens(200)
    .bind("speaker", &ctx.speaker.name)
    .bind("listener", &ctx.listener.name)
    .bind("round", (ctx.round + 1).to_string())
}

pub(crate) fn round_delta(
    a: &AgentProfile,
    b: &AgentProfile,
    pads: (PadState, PadState),
    exchange: &[(String, String)],
    cap: f64,
) -> ChatRequest {
    let lines = exchange
        .iter()
        .map(|(who, text)| format!("{who}: {text}"))
        .collect::<Vec<_>>()
        .join("\n");
    ChatRequest::new(
        TAG_ROUND_DELTA,
        format!(
            "You track how a conversation round shifts each speaker's emotion on the \
             Pleasure, Arousal and Dominance axes. Each change must lie in [-{cap}, {cap}]. \
             Answer with exactly one line per speaker in the form `Name: (+0.10, -0.05, +0.00)`."
        ),
        format!(
            "Current state:\n{}: {}\n{}: {}\n\nThis round:\n{lines}",
            a.name, pads.0, b.name, pads.1
        ),
    )
    .temperature(TEMPERATURE_SCORING)
    .max_tokens(80)
    .bind("a", &a.name)
    .bind("b", &b.name)
}

pub(crate) fn summary(a: &AgentProfile, b: &AgentProfile, transcript: &[(String, String)]) -> ChatRequest {
    let lines = transcript
        .iter()
        .map(|(who, text)| format!("{who}: {text}"))
        .collect::<Vec<_>>()
        .join("\n");
    ChatRequest::new(
        TAG_SUMMARY,
        "You summarize conversations in one sentence.",
        format!("Summarize this conversation between {} and {}:\n{lines}", a.name, b.name),
    )
    .temperature(TEMPERATURE_SCORING)
    .max_tokens(120)
    .bind("a", &a.name)
    .bind("b", &b.name)
}

pub(crate) fn poignancy(who: &AgentProfile, memory_text: &str) -> ChatRequest {
    ChatRequest::new(
        TAG_POIGNANCY,
        "You rate how poignant a memory is on a scale of 1 (mundane) to 10 (life-changing). \
         Answer with a single integer.",
        format!("{}. {}\nMemory: {memory_text}\nRating:", who.name, who.persona_text),
    )
    .temperature(TEMPERATURE_SCORING)
    .max_tokens(4)
    .bind("name", &who.name)
}

pub(crate) fn probe(
    src: &AgentProfile,
    dst: &AgentProfile,
    weight: f64,
    summary: &str,
    cap: f64,
) -> ChatRequest {
    ChatRequest::new(
        TAG_PROBE,
        format!(
            "You are {}. {}\nAfter a conversation you report how your relationship with the other \
             person changed, as one signed number in [-{cap}, {cap}].",
            src.name, src.persona_text
        ),
        format!(
            "You just talked with {}. Summary: {summary}\nYour regard for them before this \
             conversation: {weight:+.2} (from -1 to 1).\nChange:",
            dst.name
        ),
    )
    .temperature(TEMPERATURE_SCORING)
    .max_tokens(8)
    .bind("src", &src.name)
    .bind("dst", &dst.name)
}
