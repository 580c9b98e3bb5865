//! Built-in validation checks run by `sentipolis selftest`.

use sentipolis::emotion::{apply_delta, decay, DecayConfig, PadDelta, PadState, DEFAULT_DELTA_CAP};
use sentipolis::gateway::{hashed_embedding, parse_delta_reply, ScriptEntry, ScriptedBackend, EMBEDDING_DIM};
use sentipolis::memory::{run_reflection, MemoryKind, MemoryStore, NewMemory, ReflectionConfig, Reflector};
use sentipolis::network::synthetic::{rewiring_log, stable_log, REWIRE_STEP};
use sentipolis::network::{analyze, AnalysisConfig, MetricsRow};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

const ROUND_DELTAS: [&str; 4] = [
    "Tom (+0.10, +0.05, -0.05); John (+0.05, +0.10, -0.05)",
    "Tom (+0.10, +0.05, +0.15); John (-0.10, +0.05, -0.05)",
    "Tom (+0.15, +0.05, +0.10); John (-0.12, +0.15, +0.05)",
    "Tom (+0.15, +0.05, +0.10); John (-0.12, +0.08, +0.00)",
];

fn matches(got: PadState, want: [f64; 3]) -> bool {
    got.as_array()
        .iter()
        .zip(want)
        .all(|(g, w)| (g - w).abs() <= 1e-12 && format!("{g:.2}") == format!("{w:.2}"))
}

fn fmt_pad(s: PadState) -> String {
    format!("({:.2}, {:.2}, {:.2})", s.p, s.a, s.d)
}

fn pad_replay() -> Check {
    let mut tom = PadState::new(0.22, 0.49, 0.53);
    let mut john = PadState::new(0.22, 0.31, 0.49);
    for text in ROUND_DELTAS {
        match parse_delta_reply(text, &["Tom", "John"], DEFAULT_DELTA_CAP) {
            Ok(reply) => {
                tom = apply_delta(tom, reply.get("Tom").unwrap_or(PadDelta::ZERO));
                john = apply_delta(john, reply.get("John").unwrap_or(PadDelta::ZERO));
            }
            Err(e) => {
                return Check { name: "pad replay", passed: false, detail: e.to_string() };
            }
        }
    }
    Check {
        name: "pad replay",
        passed: matches(tom, [0.72, 0.69, 0.83]) && matches(john, [-0.07, 0.69, 0.44]),
        detail: format!("Tom {} John {}", fmt_pad(tom), fmt_pad(john)),
    }
}

fn decay_check() -> Check {
    let cfg = DecayConfig::default();
    let s = PadState::new(0.8, 0.8, 0.8);
    let at = |m: f64| decay(s, m, &cfg).map(|x| x.p).unwrap_or(f64::NAN);
    let (h1, h2) = (at(120.0), at(240.0));
    Check {
        name: "decay half-life",
        passed: (h1 - 0.4).abs() <= 1e-12 && (h2 - 0.2).abs() <= 1e-12,
        detail: format!("0.8 -> {h1:.6} at 120 min, {h2:.6} at 240 min"),
    }
}

fn memory(text: &str, poignancy: i64) -> NewMemory {
    NewMemory {
        kind: MemoryKind::Event,
        text: text.to_string(),
        created_step: 0,
        poignancy,
        pad_tag: PadDelta::ZERO,
        embedding: hashed_embedding(text, EMBEDDING_DIM),
    }
}

fn reflection_replay() -> Check {
    let name = "reflection replay";
    let backend = ScriptedBackend::new([
        ScriptEntry::fallback("focus_questions", "1. How is the store doing?"),
        ScriptEntry::fallback("insights", "[7] The store is busy."),
        ScriptEntry::fallback("chat_takeaways", ""),
        ScriptEntry::fallback("reflection_delta", "Tom (-0.10, +0.15, +0.20)"),
    ]);
    let mut store = MemoryStore::new(EMBEDDING_DIM);
    let mut due_at = None;
    for (i, p) in [10; 14].into_iter().chain([5, 10]).enumerate() {
        match store.add_memory(memory(&format!("routine event {i}"), p)) {
            Ok(out) if out.triggered && due_at.is_none() => due_at = Some(store.accumulator()),
            Ok(_) => {}
            Err(e) => return Check { name, passed: false, detail: e.to_string() },
        }
    }
    let start = PadState::new(0.79, 0.58, 0.79);
    let who = Reflector { name: "Tom", profile: "Tom runs the market.", pad: start };
    let outcome = match run_reflection(&mut store, who, &backend, &ReflectionConfig::default(), 1) {
        Ok(o) => o,
        Err(e) => return Check { name, passed: false, detail: e.to_string() },
    };
    let after = apply_delta(start, outcome.slow_delta);
    Check {
        name,
        passed: due_at == Some(155) && matches(after, [0.69, 0.73, 0.99]),
        detail: format!("triggered at {due_at:?}, {} -> {}", fmt_pad(start), fmt_pad(after)),
    }
}

fn adjacent(rows: &[MetricsRow]) -> impl Iterator<Item = &MetricsRow> {
    rows.iter().skip(1)
}

fn stability() -> Check {
    let name = "synthetic stability";
    let rows = match analyze(&stable_log(42), &AnalysisConfig::default()) {
        Ok(r) => r,
        Err(e) => return Check { name, passed: false, detail: e.to_string() },
    };
    let exact = adjacent(&rows).all(|r| r.nmi_prev == Some(1.0) && r.drift_prev == Some(0.0));
    let min_q = rows.iter().map(|r| r.q).fold(f64::INFINITY, f64::min);
    let min_nmi = adjacent(&rows).filter_map(|r| r.nmi_prev).fold(f64::INFINITY, f64::min);
    let max_drift = adjacent(&rows).filter_map(|r| r.drift_prev).fold(0.0, f64::max);
    Check {
        name,
        passed: exact && min_q >= 0.6,
        detail: format!("min NMI {min_nmi:.6}, max drift {max_drift:.6}, min Q {min_q:.3}"),
    }
}

fn rewiring() -> Check {
    let name = "synthetic rewiring";
    let rows = match analyze(&rewiring_log(42), &AnalysisConfig::default()) {
        Ok(r) => r,
        Err(e) => return Check { name, passed: false, detail: e.to_string() },
    };
    let Some(row) = rows.iter().find(|r| r.step == REWIRE_STEP) else {
        return Check { name, passed: false, detail: "rewiring step missing".into() };
    };
    let (nmi, drift) = (row.nmi_prev.unwrap_or(f64::NAN), row.drift_prev.unwrap_or(f64::NAN));
    Check {
        name,
        passed: nmi < 0.15 && drift > 0.9,
        detail: format!("NMI {nmi:.3} (expected near 0), drift {drift:.3} (expected near 1)"),
    }
}

pub fn run_all() -> Vec<Check> {
    vec![pad_replay(), decay_check(), reflection_replay(), stability(), rewiring()]
}
