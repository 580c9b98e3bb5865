//! LLM-judge scoring and inter-judge agreement.
//!
//! A judge backend scores each transcript on six dimensions. Agreement
//! between judges is measured with Spearman's rank correlation, computed per
//! dimension over transcripts and then averaged across dimensions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatBackend, ChatRequest, GatewayError, TEMPERATURE_SCORING};
use crate::sim::ConversationRecord;

pub const DEFAULT_RUBRIC: &str = include_str!("../data/judge_rubric.txt");
pub const SCORECARD_HEADER: [&str; 8] = ["transcript_id", "judge_id", "com", "emp", "app", "con", "bel", "soc"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("judge reply has no value for {0}")]
    MissingDimension(&'static str),
    #[error("judge reply gives {0} twice")]
    DuplicateDimension(&'static str),
    #[error("judge call failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("rank series differ in their item sets")]
    MismatchedItems,
    #[error("duplicate item {0:?} in rank series")]
    DuplicateItem(String),
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("duplicate scorecard for transcript {transcript:?} and judge {judge:?}")]
    DuplicateCard { transcript: String, judge: String },
    #[error("scorecard CSV row {row}: {message}")]
    CardFormat { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    Com,
    Emp,
    App,
    Con,
    Bel,
    Soc,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Com,
        Dimension::Emp,
        Dimension::App,
        Dimension::Con,
        Dimension::Bel,
        Dimension::Soc,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::Com => "COM",
            Dimension::Emp => "EMP",
            Dimension::App => "APP",
            Dimension::Con => "CON",
            Dimension::Bel => "BEL",
            Dimension::Soc => "SOC",
        }
    }

    /// Inclusive score range.
    pub fn range(self) -> (f64, f64) {
        match self {
            Dimension::Soc => (-10.0, 0.0),
            _ => (0.0, 10.0),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScorecard {
    pub transcript_id: String,
    pub judge_id: String,
    pub com: f64,
    pub emp: f64,
    pub app: f64,
    pub con: f64,
    pub bel: f64,
    pub soc: f64,
}

impl JudgeScorecard {
    pub fn from_scores(transcript_id: impl Into<String>, judge_id: impl Into<String>, s: [f64; 6]) -> Self {
        Self {
            transcript_id: transcript_id.into(),
            judge_id: judge_id.into(),
            com: s[0],
            emp: s[1],
            app: s[2],
            con: s[3],
            bel: s[4],
            soc: s[5],
        }
    }

    pub fn scores(&self) -> [f64; 6] {
        [self.com, self.emp, self.app, self.con, self.bel, self.soc]
    }

    pub fn score(&self, d: Dimension) -> f64 {
        self.scores()[d.index()]
    }
}

fn pair_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(COM|EMP|APP|CON|BEL|SOC)\s*=\s*([+-]?(?:\d+\.?\d*|\.\d+))").expect("valid judge regex")
    })
}

/// Parses `COM=7.6 EMP=5.3 APP=7.0 CON=2.7 BEL=6.3 SOC=0.0`. Keys are
/// case-insensitive and may appear in any order; all six are required.
/// Out-of-range values are clamped and reported in `warnings`.
pub fn parse_judge_reply(text: &str, warnings: &mut Vec<String>) -> Result<[f64; 6], EvalError> {
    let mut found: [Option<f64>; 6] = [None; 6];
    for caps in pair_pattern().captures_iter(text) {
        let key = caps[1].to_ascii_uppercase();
        let dim = Dimension::ALL.into_iter().find(|d| d.key() == key).expect("regex limits keys");
        let Ok(value) = caps[2].parse::<f64>() else { continue };
        if found[dim.index()].is_some() {
            return Err(EvalError::DuplicateDimension(dim.key()));
        }
        let (lo, hi) = dim.range();
        let clamped = value.clamp(lo, hi);
        if clamped != value {
            warnings.push(format!("{}={value} outside [{lo}, {hi}]; clamped to {clamped}", dim.key()));
        }
        found[dim.index()] = Some(clamped);
    }
    let mut out = [0.0; 6];
    for d in Dimension::ALL {
        out[d.index()] = found[d.index()].ok_or(EvalError::MissingDimension(d.key()))?;
    }
    Ok(out)
}

/// Plain-text rendering of a conversation record for judging.
pub fn render_transcript(rec: &ConversationRecord) -> String {
    let mut out = format!(
        "Step {} at {}. Participants: {} and {}.\n",
        rec.step, rec.location, rec.participants[0], rec.participants[1]
    );
    for round in &rec.rounds {
        for u in &round.utterances {
            out.push_str(&format!("{}: {}\n", u.speaker, u.text));
        }
    }
    out
}

/// Scores one transcript with one judge. The returned warnings list any
/// clamped values.
pub fn judge_transcript(
    transcript_id: &str,
    transcript_text: &str,
    judge: &dyn ChatBackend,
    judge_id: &str,
    rubric: &str,
) -> Result<(JudgeScorecard, Vec<String>), EvalError> {
    let req = ChatRequest::new("judge", rubric.trim(), format!("Transcript:\n{transcript_text}\nScores:"))
        .temperature(TEMPERATURE_SCORING)
        .max_tokens(60)
        .bind("judge", judge_id)
        .bind("transcript", transcript_id);
    let reply = judge.send(&req)?;
    let mut warnings = Vec::new();
    let scores = parse_judge_reply(&reply.text, &mut warnings)?;
    for w in &warnings {
        log::warn!("judge {judge_id} on {transcript_id}: {w}");
    }
    Ok((JudgeScorecard::from_scores(transcript_id, judge_id, scores), warnings))
}

/// Scores for one judge and one dimension, keyed by item id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSeries {
    items: BTreeMap<String, f64>,
}

impl RankSeries {
    pub fn new<K: Into<String>>(items: impl IntoIterator<Item = (K, f64)>) -> Result<Self, EvalError> {
        let mut map = BTreeMap::new();
        for (k, v) in items {
            let k = k.into();
            if map.insert(k.clone(), v).is_some() {
                return Err(EvalError::DuplicateItem(k));
            }
        }
        Ok(Self { items: map })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Fractional ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks. `Ok(None)` when
/// either series has no rank variance.
pub fn spearman(x: &RankSeries, y: &RankSeries) -> Result<Option<f64>, EvalError> {
    if x.items.len() != y.items.len() || x.items.keys().ne(y.items.keys()) {
        return Err(EvalError::MismatchedItems);
    }
    if x.items.len() < 2 {
        return Err(EvalError::TooFewItems(x.items.len()));
    }
    let xs: Vec<f64> = x.items.values().copied().collect();
    let ys: Vec<f64> = y.items.values().copied().collect();
    let (rx, ry) = (average_ranks(&xs), average_ranks(&ys));
    // Evaluate in a canonical argument order so the result is exactly symmetric.
    let key = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    Ok(if key(&rx) <= key(&ry) { pearson(&rx, &ry) } else { pearson(&ry, &rx) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairAgreement {
    /// Per-dimension rho in [`Dimension::ALL`] order; `None` when undefined.
    pub per_dimension: [Option<f64>; 6],
    /// Mean over the defined dimensions.
    pub mean: Option<f64>,
    /// Transcripts scored by both judges.
    pub shared_items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterJudgeReport {
    pub judges: Vec<String>,
    /// Keyed by judge pair `(a, b)` with `a < b`.
    pub pairs: BTreeMap<(String, String), PairAgreement>,
    /// Mean over pairs with a defined mean.
    pub overall_mean: Option<f64>,
}

impl InterJudgeReport {
    pub fn mean_rho(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            return Some(1.0);
        }
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.pairs.get(&key).and_then(|p| p.mean)
    }
}

/// Pairwise agreement between all judges. For each pair, transcripts scored
/// by only one of them are dropped; rho is computed per dimension and then
/// averaged. Pairs sharing fewer than two transcripts are reported missing.
pub fn inter_judge_report(cards: &[JudgeScorecard]) -> Result<InterJudgeReport, EvalError> {
    let mut by_judge: BTreeMap<&str, BTreeMap<&str, &JudgeScorecard>> = BTreeMap::new();
    for c in cards {
        let prev = by_judge.entry(&c.judge_id).or_default().insert(&c.transcript_id, c);
        if prev.is_some() {
            return Err(EvalError::DuplicateCard {
                transcript: c.transcript_id.clone(),
                judge: c.judge_id.clone(),
            });
        }
    }
    let judges: Vec<String> = by_judge.keys().map(|s| s.to_string()).collect();
    let mut pairs = BTreeMap::new();
    for (i, a) in judges.iter().enumerate() {
        for b in &judges[i + 1..] {
            let (ca, cb) = (&by_judge[a.as_str()], &by_judge[b.as_str()]);
            let shared: BTreeSet<&str> = ca.keys().filter(|t| cb.contains_key(*t)).copied().collect();
            let mut per_dimension = [None; 6];
            if shared.len() >= 2 {
                for d in Dimension::ALL {
                    let xa = RankSeries::new(shared.iter().map(|t| (*t, ca[t].score(d))))?;
                    let xb = RankSeries::new(shared.iter().map(|t| (*t, cb[t].score(d))))?;
                    per_dimension[d.index()] = spearman(&xa, &xb)?;
                }
            }
            let defined: Vec<f64> = per_dimension.iter().flatten().copied().collect();
            let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            pairs.insert(
                (a.clone(), b.clone()),
                PairAgreement { per_dimension, mean, shared_items: shared.len() },
            );
        }
    }
    let means: Vec<f64> = pairs.values().filter_map(|p| p.mean).collect();
    let overall_mean = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
    Ok(InterJudgeReport { judges, pairs, overall_mean })
}

fn fixed6(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_scorecards<W: Write>(out: W, cards: &[JudgeScorecard]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORECARD_HEADER)?;
    for c in cards {
        let mut row = vec![c.transcript_id.clone(), c.judge_id.clone()];
        row.extend(c.scores().iter().map(|s| format!("{s:.3}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads scorecards, requiring the exact header and in-range scores.
pub fn read_scorecards<R: Read>(input: R) -> Result<Vec<JudgeScorecard>, EvalError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != SCORECARD_HEADER {
        return Err(EvalError::CardFormat { row: 0, message: format!("unexpected header {header:?}") });
    }
    let mut cards = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |message: String| EvalError::CardFormat { row: i + 1, message };
        let mut scores = [0.0; 6];
        for d in Dimension::ALL {
            let raw = rec.get(2 + d.index()).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| bad(format!("bad {} value {raw:?}", d.key())))?;
            let (lo, hi) = d.range();
            if !(lo..=hi).contains(&v) {
                return Err(bad(format!("{} value {v} outside [{lo}, {hi}]", d.key())));
            }
            scores[d.index()] = v;
        }
        cards.push(JudgeScorecard::from_scores(
            rec.get(0).unwrap_or("").trim(),
            rec.get(1).unwrap_or("").trim(),
            scores,
        ));
    }
    Ok(cards)
}

/// Square matrix of mean rho with judges on both axes, then an
/// `overall_mean` row.
pub fn write_report<W: Write>(out: W, report: &InterJudgeReport) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header = vec!["judge".to_string()];
    header.extend(report.judges.iter().cloned());
    w.write_record(&header)?;
    for a in &report.judges {
        let mut row = vec![a.clone()];
        row.extend(report.judges.iter().map(|b| fixed6(report.mean_rho(a, b))));
        w.write_record(&row)?;
    }
    w.write_record(["overall_mean".to_string(), fixed6(report.overall_mean)])?;
    w.flush()?;
    Ok(())
}
