//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use sentipolis::emotion::{apply_delta, decay, DecayConfig, PadDelta, PadState, DEFAULT_DELTA_CAP};
use sentipolis::enrichment::{AnchorPoint, AnchorSet, EmotionLabel};
use sentipolis::eval::{read_scorecards, spearman, write_scorecards, JudgeScorecard, RankSeries, SCORECARD_HEADER};
use sentipolis::gateway::{hashed_embedding, parse_delta_reply, ScriptedBackend, EMBEDDING_DIM};
use sentipolis::memory::{run_reflection, MemoryKind, MemoryStore, NewMemory, ReflectionConfig, Reflector};
use sentipolis::network::synthetic::{rewiring_log, stable_log, REWIRE_STEP};
use sentipolis::network::{
    analyze, louvain, modularity, nmi, read_metrics_csv, reciprocity, symmetrize, threshold, write_metrics_csv,
    AnalysisConfig, DirectedGraph, Partition, METRICS_HEADER,
};
use sentipolis::sim::{check_monotone, default_personas, read_snapshots, SimConfig, World};

const CONVERSATION_SCRIPT: &str = include_str!("fixtures/conversation_script.jsonl");
const REFLECTION_SCRIPT: &str = include_str!("fixtures/reflection_script.jsonl");
const REFLECTION_MEMORIES: &str = include_str!("fixtures/reflection_memories.jsonl");

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn exact(got: f64, want: f64) -> bool {
    (got - want).abs() <= 1e-12 && format!("{got:.2}") == format!("{want:.2}")
}

fn exact_pad(got: PadState, want: [f64; 3]) -> bool {
    got.as_array().iter().zip(want).all(|(g, w)| exact(*g, w))
}

fn fmt_pad(s: PadState) -> String {
    format!("({:.2}, {:.2}, {:.2})", s.p, s.a, s.d)
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("{what} took {elapsed:?}, limit {limit:?}"))
    }
}

// 1 -------------------------------------------------------------------------

fn pad_replay() -> Outcome {
    let replies: Vec<String> = CONVERSATION_SCRIPT
        .lines()
        .filter(|l| l.contains("\"round_delta\""))
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["reply_text"].as_str().unwrap().to_string())
        .collect();
    if replies.len() != 4 {
        return Err(format!("expected 4 round deltas in fixture, found {}", replies.len()));
    }
    // The reply grammar compiles its pattern on first use; keep that out of the timing.
    parse_delta_reply(&replies[0], &["Tom", "John"], DEFAULT_DELTA_CAP).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut tom = PadState::new(0.22, 0.49, 0.53);
    let mut john = PadState::new(0.22, 0.31, 0.49);
    for text in &replies {
        let reply = parse_delta_reply(text, &["Tom", "John"], DEFAULT_DELTA_CAP).map_err(|e| e.to_string())?;
        tom = apply_delta(tom, reply.get("Tom").ok_or("no Tom delta")?);
        john = apply_delta(john, reply.get("John").ok_or("no John delta")?);
    }
    let elapsed = start.elapsed();
    let detail = format!("Tom {} John {} in {elapsed:?}", fmt_pad(tom), fmt_pad(john));
    within(elapsed, Duration::from_millis(1), "replay")?;
    if exact_pad(tom, [0.72, 0.69, 0.83]) && exact_pad(john, [-0.07, 0.69, 0.44]) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 2 -------------------------------------------------------------------------

#[derive(Deserialize)]
struct FixtureMemory {
    kind: MemoryKind,
    poignancy: i64,
    text: String,
}

fn new_memory(kind: MemoryKind, text: &str, poignancy: i64) -> NewMemory {
    NewMemory {
        kind,
        text: text.to_string(),
        created_step: 0,
        poignancy,
        pad_tag: PadDelta::ZERO,
        embedding: hashed_embedding(text, EMBEDDING_DIM),
    }
}

fn reflection_replay() -> Outcome {
    let chats: Vec<FixtureMemory> = REFLECTION_MEMORIES
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let backend = ScriptedBackend::from_jsonl(REFLECTION_SCRIPT).map_err(|e| e.to_string())?;
    let mut store = MemoryStore::new(EMBEDDING_DIM);

    // Routine events bring the accumulator to 131, the first two chats to 145.
    for i in 0..13 {
        store.add_memory(new_memory(MemoryKind::Event, &format!("Tom restocks shelf {i}"), 10)).map_err(|e| e.to_string())?;
    }
    store.add_memory(new_memory(MemoryKind::Event, "Tom opens the store at 8 AM", 1)).map_err(|e| e.to_string())?;
    let (last, first) = chats.split_last().ok_or("empty memory fixture")?;
    for m in first {
        let out = store.add_memory(new_memory(m.kind, &m.text, m.poignancy)).map_err(|e| e.to_string())?;
        if out.triggered {
            return Err(format!("triggered early at {}", store.accumulator()));
        }
    }
    let before = store.accumulator();
    let out = store.add_memory(new_memory(last.kind, &last.text, last.poignancy)).map_err(|e| e.to_string())?;
    let at = store.accumulator();
    if !(before == 145 && out.triggered && at == 155) {
        return Err(format!("accumulator {before} -> {at}, triggered {}", out.triggered));
    }

    let pad = PadState::new(0.79, 0.58, 0.79);
    let who = Reflector { name: "Tom", profile: "Tom Moreno runs the Willows market.", pad };
    let start = Instant::now();
    let outcome = run_reflection(&mut store, who, &backend, &ReflectionConfig::default(), 1).map_err(|e| e.to_string())?;
    let after = apply_delta(pad, outcome.slow_delta);
    let elapsed = start.elapsed();
    let detail = format!("triggered at {at}, {} -> {} in {elapsed:?}", fmt_pad(pad), fmt_pad(after));
    within(elapsed, Duration::from_millis(10), "reflection")?;
    if exact_pad(after, [0.69, 0.73, 0.99]) && store.accumulator() == 0 && outcome.insight_ids.len() == 4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 3 -------------------------------------------------------------------------

fn decay_check() -> Outcome {
    let cfg = DecayConfig::default();
    let s = PadState::new(0.8, 0.8, 0.8);
    let at = |m: f64| decay(s, m, &cfg).unwrap();
    let (h1, h2) = (at(120.0), at(240.0));
    let half = h1.as_array().iter().all(|v| (v - 0.4).abs() <= 1e-12);
    let quarter = h2.as_array().iter().all(|v| (v - 0.2).abs() <= 1e-12);
    if !(half && quarter) {
        return Err(format!("0.8 -> {} at 120, {} at 240", h1.p, h2.p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = PadState::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let (t1, t2) = (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
        let chained = decay(decay(s, t1, &cfg).unwrap(), t2, &cfg).unwrap();
        let direct = decay(s, t1 + t2, &cfg).unwrap();
        for (a, b) in chained.as_array().iter().zip(direct.as_array()) {
            let rel = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            if (a - b).abs() > 0.0 {
                worst = worst.max(rel);
            }
        }
    }
    if worst <= 1e-12 {
        Ok(format!("0.8 -> 0.4 -> 0.2; semigroup worst relative error {worst:.1e} over 1000 trials"))
    } else {
        Err(format!("semigroup relative error {worst:.3e}"))
    }
}

// 4 -------------------------------------------------------------------------

fn synthetic_validation() -> Outcome {
    let start = Instant::now();
    let cfg = AnalysisConfig::default();
    let stable = analyze(&stable_log(42), &cfg).map_err(|e| e.to_string())?;
    let rewired = analyze(&rewiring_log(42), &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(2), "synthetic analysis")?;

    let pairs_exact = stable.iter().skip(1).all(|r| r.nmi_prev == Some(1.0) && r.drift_prev == Some(0.0));
    let min_q = stable.iter().map(|r| r.q).fold(f64::INFINITY, f64::min);
    let boundary = rewired.iter().find(|r| r.step == REWIRE_STEP).ok_or("no boundary row")?;
    let (b_nmi, b_drift) = (boundary.nmi_prev.unwrap_or(f64::NAN), boundary.drift_prev.unwrap_or(f64::NAN));
    let detail = format!(
        "stable: NMI=1 Drift=0 at all 9 pairs {pairs_exact}, min Q {min_q:.3}; rewiring: NMI {b_nmi:.3} Drift {b_drift:.3}; {elapsed:?}"
    );
    if pairs_exact && stable.len() == 10 && min_q >= 0.6 && b_nmi < 0.15 && b_drift > 0.9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 5 -------------------------------------------------------------------------

fn node(i: usize) -> String {
    format!("n{i}")
}

/// Random directed graph on up to 8 nodes, some weights under the threshold.
fn random_digraph(rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize, f64)>) {
    let n = rng.random_range(1..=8);
    let density = rng.random_range(0.1..0.9);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(density) {
                let w = if rng.random_bool(0.2) { 0.1 } else { (rng.random_range(1..=10) as f64) / 10.0 };
                edges.push((a, b, w));
            }
        }
    }
    (n, edges)
}

fn build(n: usize, edges: &[(usize, usize, f64)]) -> DirectedGraph {
    let mut g = DirectedGraph::new();
    for i in 0..n {
        g.add_node(node(i));
    }
    for &(a, b, w) in edges {
        g.add_edge(&node(a), &node(b), w).unwrap();
    }
    g
}

/// Dense symmetric matrix after thresholding and summing both directions.
fn dense(n: usize, edges: &[(usize, usize, f64)], tau: f64) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j, w) in edges {
        if w >= tau {
            a[i][j] += w;
            a[j][i] += w;
        }
    }
    a
}

fn double_sum_q(a: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = a.len();
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Every set partition of `0..n` as a restricted growth string.
fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let max = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for c in 0..=max {
            prefix.push(c);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

fn contingency_nmi(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len() as f64;
    let (kx, ky) = (x.iter().max().unwrap() + 1, y.iter().max().unwrap() + 1);
    let mut table = vec![vec![0.0; ky]; kx];
    for (a, b) in x.iter().zip(y) {
        table[*a][*b] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..ky).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h = |v: &[f64]| -> f64 { v.iter().filter(|c| **c > 0.0).map(|c| -(c / n) * (c / n).log2()).sum() };
    let (hx, hy) = (h(&rows), h(&cols));
    if hx + hy == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for i in 0..kx {
        for j in 0..ky {
            let c = table[i][j];
            if c > 0.0 {
                mi += c / n * (n * c / (rows[i] * cols[j])).log2();
            }
        }
    }
    2.0 * mi / (hx + hy)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tau = 0.2;
    let partitions: Vec<Vec<Vec<usize>>> = (0..=8).map(all_partitions).collect();
    let (mut q_err, mut nmi_err): (f64, f64) = (0.0, 0.0);
    let trials = 600;
    for t in 0..trials {
        let (n, edges) = random_digraph(&mut rng);
        let directed = threshold(&build(n, &edges), tau);
        let g = symmetrize(&directed);
        let a = dense(n, &edges, tau);

        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let p = Partition::new((0..n).map(|i| (node(i), labels[i])));
        let q = modularity(&g, &p).map_err(|e| e.to_string())?;
        q_err = q_err.max((q - double_sum_q(&a, &labels)).abs());

        let best = partitions[n].iter().map(|l| double_sum_q(&a, l)).fold(f64::NEG_INFINITY, f64::max);
        let found = louvain(&g, 1.0, 42).map_err(|e| e.to_string())?;
        let lq = modularity(&g, &found).map_err(|e| e.to_string())?;
        if lq > best + 1e-10 {
            return Err(format!("trial {t}: louvain Q {lq} exceeds optimum {best}"));
        }

        let kept: BTreeMap<(usize, usize), f64> =
            edges.iter().filter(|e| e.2 >= tau).map(|&(i, j, w)| ((i, j), w)).collect();
        let (mut connected, mut mutual, mut sym) = (0usize, 0usize, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                match (kept.get(&(i, j)), kept.get(&(j, i))) {
                    (Some(x), Some(y)) => {
                        connected += 1;
                        mutual += 1;
                        sym += 1.0 - (x - y).abs() / (x + y);
                    }
                    (None, None) => {}
                    _ => connected += 1,
                }
            }
        }
        let want_r = if connected == 0 { 0.0 } else { mutual as f64 / connected as f64 };
        let want_rw = if mutual == 0 { 0.0 } else { sym / mutual as f64 };
        let rec = reciprocity(&directed);
        if rec.r != want_r || (rec.r_w - want_rw).abs() > 1e-12 || rec.no_reciprocal_pairs != (mutual == 0) {
            return Err(format!("trial {t}: reciprocity {rec:?}, enumeration r={want_r} r_w={want_rw}"));
        }

        let other: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let p2 = Partition::new((0..n).map(|i| (node(i), other[i])));
        let got = nmi(&p, &p2).map_err(|e| e.to_string())?;
        nmi_err = nmi_err.max((got - contingency_nmi(&labels, &other)).abs());
    }
    if q_err <= 1e-10 && nmi_err <= 1e-10 {
        Ok(format!("{trials} graphs; max |dQ| {q_err:.1e}, max |dNMI| {nmi_err:.1e}; louvain within optimum; reciprocity exact"))
    } else {
        Err(format!("max |dQ| {q_err:.3e}, max |dNMI| {nmi_err:.3e}"))
    }
}

// 6 -------------------------------------------------------------------------

fn linear_scan(points: &[AnchorPoint], q: &PadState, k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = ((p.pad.p - q.p).powi(2) + (p.pad.a - q.a).powi(2) + (p.pad.d - q.d).powi(2)).sqrt();
            (d, i)
        })
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    order.into_iter().take(k).map(|(_, i)| i).collect()
}

fn knn_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tie_trials = 0;
    for t in 0..1500 {
        let n = rng.random_range(1..=30);
        // Half the trials draw from a coarse grid so exact distance ties are common.
        let coarse = t % 2 == 0;
        let coord = |rng: &mut ChaCha8Rng| {
            if coarse {
                rng.random_range(-2..=2) as f64 * 0.5
            } else {
                rng.random_range(-1.0..=1.0)
            }
        };
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let label = EmotionLabel::ALL[rng.random_range(0..EmotionLabel::ALL.len())];
            points.push(AnchorPoint { label, pad: PadState::new(coord(&mut rng), coord(&mut rng), coord(&mut rng)) });
        }
        if coarse && n > 1 && rng.random_bool(0.5) {
            let dup = points[rng.random_range(0..n)].pad;
            let at = rng.random_range(0..n);
            points[at].pad = dup;
        }
        let k = rng.random_range(1..=n.min(5));
        let set = AnchorSet::new(points.clone(), k).map_err(|e| e.to_string())?;
        let q = PadState::new(coord(&mut rng), coord(&mut rng), coord(&mut rng));
        let want = linear_scan(&points, &q, k);
        if set.nearest(&q) != want {
            return Err(format!("trial {t}: nearest {:?}, linear scan {want:?}", set.nearest(&q)));
        }
        let labels: Vec<EmotionLabel> = want.iter().map(|&i| points[i].label).collect();
        if set.knn_labels(&q) != labels {
            return Err(format!("trial {t}: label mismatch"));
        }
        let dists: Vec<f64> = points.iter().map(|p| p.pad.distance(&q)).collect();
        let distinct: BTreeSet<u64> = dists.iter().map(|d| d.to_bits()).collect();
        if distinct.len() < dists.len() {
            tie_trials += 1;
        }
    }
    if tie_trials >= 300 {
        Ok(format!("1500 trials match linear scan, {tie_trials} with exact distance ties"))
    } else {
        Err(format!("only {tie_trials} tie trials"))
    }
}

// 7 -------------------------------------------------------------------------

fn full_run() -> Result<(Vec<u8>, Vec<u8>), String> {
    let world = World::new(SimConfig::default(), default_personas(), Arc::new(ScriptedBackend::bundled()));
    let mut world = world.map_err(|e| e.to_string())?;
    let (mut snaps, mut txs) = (Vec::new(), Vec::new());
    world.run(&mut snaps, &mut txs).map_err(|e| e.to_string())?;
    Ok((snaps, txs))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let first = full_run()?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30), "full run")?;
    let second = full_run()?;
    if first != second {
        return Err("runs differ".into());
    }
    let log = read_snapshots(first.0.as_slice()).map_err(|e| e.to_string())?;
    if log.len() != 36 {
        return Err(format!("{} snapshots", log.len()));
    }
    check_monotone(&log).map_err(|(step, s, d)| format!("edge {s}->{d} vanished at step {step}"))?;
    let conversations = first.1.iter().filter(|b| **b == b'\n').count();
    Ok(format!(
        "25 agents x 36 steps in {elapsed:?}; byte-identical reruns; {conversations} conversations; final {} edges, monotone",
        log.last().map_or(0, |s| s.edges.len())
    ))
}

// 8 -------------------------------------------------------------------------

fn rho(x: &[f64], y: &[f64]) -> Option<f64> {
    let sx = RankSeries::new(x.iter().enumerate().map(|(i, v)| (format!("t{i:02}"), *v))).unwrap();
    let sy = RankSeries::new(y.iter().enumerate().map(|(i, v)| (format!("t{i:02}"), *v))).unwrap();
    spearman(&sx, &sy).unwrap()
}

fn spearman_check() -> Outcome {
    let base = [1.0, 2.0, 3.0, 4.0];
    let same = rho(&base, &base);
    let reversed = rho(&base, &[4.0, 3.0, 2.0, 1.0]);
    let swap = rho(&base, &[1.0, 2.0, 4.0, 3.0]);
    let fixtures_ok = same == Some(1.0)
        && reversed == Some(-1.0)
        && swap.is_some_and(|r| (r - 0.8).abs() <= 1e-12);
    if !fixtures_ok {
        return Err(format!("identical {same:?}, reversed {reversed:?}, single swap {swap:?}"));
    }
    let transforms: [fn(f64) -> f64; 4] = [|v| v.exp(), |v| v * v * v + 2.0, |v| v.atan(), |v| 3.0 * v - 7.0];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in 0..1000 {
        let n = rng.random_range(2..=15);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        let f = transforms[t % transforms.len()];
        let fx: Vec<f64> = x.iter().map(|v| f(*v)).collect();
        let (a, b) = (rho(&x, &y), rho(&fx, &y));
        let same = match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        if !same {
            return Err(format!("trial {t}: {a:?} vs {b:?} after transform"));
        }
    }
    Ok("identical 1.0, reversed -1.0, single swap 0.8; 1000 monotone-transform trials invariant".into())
}

// 9 -------------------------------------------------------------------------

fn output_schemas() -> Outcome {
    let cards = vec![
        JudgeScorecard::from_scores("s000_a_b", "judge_1", [7.6, 5.3, 7.0, 2.7, 6.3, 0.0]),
        JudgeScorecard::from_scores("s000_a_b", "judge_2", [6.0, 5.0, 6.5, 3.0, 6.0, -1.5]),
    ];
    let mut buf = Vec::new();
    write_scorecards(&mut buf, &cards).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if lines.next() != Some(SCORECARD_HEADER.join(",").as_str()) {
        return Err(format!("scorecard header: {text}"));
    }
    if lines.next() != Some("s000_a_b,judge_1,7.600,5.300,7.000,2.700,6.300,0.000") {
        return Err(format!("scorecard row: {text}"));
    }
    if read_scorecards(text.as_bytes()).map_err(|e| e.to_string())? != cards {
        return Err("scorecards do not round-trip".into());
    }

    let rows = analyze(&stable_log(42), &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows).map_err(|e| e.to_string())?;
    let text = String::from_utf8(buf).map_err(|e| e.to_string())?;
    let all: Vec<&str> = text.lines().collect();
    if all[0] != METRICS_HEADER.join(",") || all.len() != 11 {
        return Err(format!("metrics header/row count: {:?}", &all[..1]));
    }
    if !all[1].ends_with(",,") || all.iter().skip(1).any(|l| l.split(',').count() != 6) {
        return Err("metrics rows malformed".into());
    }
    let back = read_metrics_csv(text.as_bytes()).map_err(|e| e.to_string())?;
    if back.len() != rows.len() || back.iter().zip(&rows).any(|(a, b)| (a.q - b.q).abs() > 5e-7) {
        return Err("metrics do not round-trip".into());
    }
    Ok("scorecard CSV (transcript_id,judge_id,com..soc) and metrics CSV (step,q,r,r_w,nmi_prev,drift_prev) match their schemas".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("PAD replay", pad_replay),
        ("reflection replay", reflection_replay),
        ("decay", decay_check),
        ("network synthetic validation", synthetic_validation),
        ("metric oracles", metric_oracles),
        ("KNN oracle", knn_oracle),
        ("end-to-end determinism", determinism),
        ("Spearman", spearman_check),
        ("output schemas", output_schemas),
    ];
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let line = match check() {
            Ok(detail) => format!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                format!("criterion {}: FAIL {name}: {detail}", i + 1)
            }
        };
        writeln!(stdout.lock(), "{line}").ok();
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
