//! Semantic enrichment: PAD coordinate to human emotion labels.
//!
//! A continuous [`PadState`] is hard for a language model to interpret, so
//! we look up the nearest human-annotated reference points in an anchor set
//! and hand *all* of their labels (nearest first, no vote) to a prompt that
//! asks for a short emotion paragraph.
//!
//! Anchor files are CSV with header `label,p,a,d`. A leading comment line
//! `# scale=raw07` marks the whole file as raw annotation scale (0..7), and
//! an optional fifth column `raw` does the same per row.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::PadState;

/// Default neighbourhood size for label lookup.
pub const DEFAULT_K: usize = 3;

/// Embedded in every enrichment prompt so generated paragraphs can be traced
/// back to the template that produced them.
pub const ENRICHMENT_TEMPLATE_VERSION: &str = "enrichment-v1";

/// Synthetic anchor set shipped with the crate. Hand-placed clusters, not a
/// real annotation corpus.
pub const SYNTHETIC_ANCHORS_CSV: &str = include_str!("../data/anchors_synthetic.csv");

const RAW_SCALE_MAX: f64 = 7.0;

#[derive(Debug, Error)]
pub enum AnchorError {
    #[error("failed to read anchor file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: unknown emotion label {label:?}")]
    UnknownLabel { line: u64, label: String },
    #[error("line {line}: {message}")]
    OutOfRange { line: u64, message: String },
    #[error("raw PAD value {0} is outside [0, 7]")]
    RawOutOfRange(f64),
    #[error("anchor set is empty")]
    Empty,
    #[error("k = {k} is invalid for an anchor set of {n} points")]
    InvalidK { k: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Anger,
    Sadness,
    Happiness,
    Surprise,
    Fear,
    Disgust,
    Contempt,
    Neutral,
    /// Merged "Other" / "No Agreement": annotators did not converge.
    Vague,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 9] = [
        EmotionLabel::Anger,
        EmotionLabel::Sadness,
        EmotionLabel::Happiness,
        EmotionLabel::Surprise,
        EmotionLabel::Fear,
        EmotionLabel::Disgust,
        EmotionLabel::Contempt,
        EmotionLabel::Neutral,
        EmotionLabel::Vague,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Contempt => "contempt",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Vague => "vague",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel(pub String);

impl FromStr for EmotionLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .flat_map(char::to_lowercase)
            .collect();
        let label = match key.as_str() {
            "anger" => EmotionLabel::Anger,
            "sadness" => EmotionLabel::Sadness,
            "happiness" => EmotionLabel::Happiness,
            "surprise" => EmotionLabel::Surprise,
            "fear" => EmotionLabel::Fear,
            "disgust" => EmotionLabel::Disgust,
            "contempt" => EmotionLabel::Contempt,
            "neutral" => EmotionLabel::Neutral,
            "vague" | "other" | "noagreement" => EmotionLabel::Vague,
            _ => return Err(UnknownLabel(s.to_string())),
        };
        Ok(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoint {
    pub label: EmotionLabel,
    pub pad: PadState,
}

/// Immutable, ordered anchor collection. Row order is significant: it breaks
/// exact distance ties.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    points: Vec<AnchorPoint>,
    k: usize,
}

impl AnchorSet {
    pub fn new(points: Vec<AnchorPoint>, k: usize) -> Result<Self, AnchorError> {
        if points.is_empty() {
            return Err(AnchorError::Empty);
        }
        if k == 0 || k > points.len() {
            return Err(AnchorError::InvalidK { k, n: points.len() });
        }
        Ok(Self { points, k })
    }

    /// The bundled synthetic set with `k = 3`.
    pub fn synthetic() -> Self {
        parse_anchors(SYNTHETIC_ANCHORS_CSV, DEFAULT_K).expect("bundled anchor file is valid")
    }

    pub fn points(&self) -> &[AnchorPoint] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_k(self, k: usize) -> Result<Self, AnchorError> {
        Self::new(self.points, k)
    }

    /// Labels of the `k` nearest anchors, nearest first.
    pub fn knn_labels(&self, query: &PadState) -> Vec<EmotionLabel> {
        self.nearest(query)
            .into_iter()
            .map(|i| self.points[i].label)
            .collect()
    }

    /// Indices of the `k` nearest anchors by Euclidean distance, nearest first.
    /// Equal distances keep file order.
    pub fn nearest(&self, query: &PadState) -> Vec<usize> {
        // Sorted buffer of (distance, index); k is tiny so insertion is cheaper
        // than a heap.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, point) in self.points.iter().enumerate() {
            let dist = point.pad.distance(query);
            if best.len() == self.k {
                match best.last() {
                    Some(&(worst, _)) if dist < worst => {
                        best.pop();
                    }
                    _ => continue,
                }
            }
            let at = best.partition_point(|&(d, _)| d <= dist);
            best.insert(at, (dist, i));
        }
        best.into_iter().map(|(_, i)| i).collect()
    }
}

/// Free-function form of [`AnchorSet::knn_labels`].
pub fn knn_labels(anchors: &AnchorSet, query: &PadState) -> Vec<EmotionLabel> {
    anchors.knn_labels(query)
}

/// Maps a raw annotation value on the 0..7 scale to `[-1, 1]`.
pub fn normalize_raw(raw: f64) -> Result<f64, AnchorError> {
    if !(0.0..=RAW_SCALE_MAX).contains(&raw) {
        return Err(AnchorError::RawOutOfRange(raw));
    }
    Ok(raw / (RAW_SCALE_MAX / 2.0) - 1.0)
}

/// Inverse of [`normalize_raw`].
pub fn denormalize(value: f64) -> f64 {
    (value + 1.0) * (RAW_SCALE_MAX / 2.0)
}

pub fn load_anchors(path: impl AsRef<Path>, k: usize) -> Result<AnchorSet, AnchorError> {
    let text = std::fs::read_to_string(path)?;
    parse_anchors(&text, k)
}

/// Parses anchor CSV text. Labels are case-insensitive; "Other" and
/// "No Agreement" collapse into [`EmotionLabel::Vague`].
pub fn parse_anchors(text: &str, k: usize) -> Result<AnchorSet, AnchorError> {
    let points = parse_anchor_rows(text)?;
    AnchorSet::new(points, k)
}

/// Row-level parse without the `k` check; used by the anchor conversion tool.
pub fn parse_anchor_rows(text: &str) -> Result<Vec<AnchorPoint>, AnchorError> {
    parse_rows(text, false)
}

/// Like [`parse_anchor_rows`] but every row is on the raw 0-7 scale.
pub fn parse_raw_anchor_rows(text: &str) -> Result<Vec<AnchorPoint>, AnchorError> {
    parse_rows(text, true)
}

/// The header line is optional; without it columns are `label,p,a,d`.
fn parse_rows(text: &str, assume_raw: bool) -> Result<Vec<AnchorPoint>, AnchorError> {
    let file_raw = assume_raw
        || text
            .lines()
            .map(str::trim)
            .take_while(|l| l.is_empty() || l.starts_with('#'))
            .any(|l| {
                l.trim_start_matches('#')
                    .split_whitespace()
                    .any(|tok| tok.eq_ignore_ascii_case("scale=raw07"))
            });

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = reader.records().peekable();

    let mut names: Vec<String> = ["label", "p", "a", "d"].map(String::from).to_vec();
    if let Some(Ok(first)) = records.peek() {
        if first.get(0).is_some_and(|f| f.eq_ignore_ascii_case("label")) {
            let header = first.clone();
            records.next();
            names = header.iter().map(|h| h.to_ascii_lowercase()).collect();
            let expected = ["label", "p", "a", "d"];
            if names.len() < 4 || names[..4] != expected || (names.len() == 5 && names[4] != "raw") || names.len() > 5 {
                let line = header.position().map(|p| p.line()).unwrap_or(1);
                return Err(AnchorError::Malformed {
                    line,
                    message: format!("expected header `label,p,a,d[,raw]`, found `{}`", names.join(",")),
                });
            }
        }
    }
    let has_raw_column = names.len() == 5;

    let mut points = Vec::new();
    for record in records {
        let record = record.map_err(|e| AnchorError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != names.len() {
            return Err(AnchorError::Malformed {
                line,
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        let label: EmotionLabel = record[0].parse().map_err(|UnknownLabel(label)| {
            AnchorError::UnknownLabel { line, label }
        })?;
        let raw_row = file_raw
            || (has_raw_column && parse_flag(&record[4]).ok_or_else(|| AnchorError::Malformed {
                line,
                message: format!("invalid raw flag {:?}", &record[4]),
            })?);
        let mut coords = [0.0; 3];
        for (slot, field) in coords.iter_mut().zip(record.iter().skip(1).take(3)) {
            let value: f64 = field.parse().map_err(|_| AnchorError::Malformed {
                line,
                message: format!("invalid number {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(AnchorError::Malformed {
                    line,
                    message: format!("non-finite number {field:?}"),
                });
            }
            *slot = if raw_row {
                normalize_raw(value).map_err(|e| AnchorError::OutOfRange {
                    line,
                    message: e.to_string(),
                })?
            } else if (-1.0..=1.0).contains(&value) {
                value
            } else {
                return Err(AnchorError::OutOfRange {
                    line,
                    message: format!("normalized PAD value {value} is outside [-1, 1]"),
                });
            };
        }
        points.push(AnchorPoint {
            label,
            pad: PadState {
                p: coords[0],
                a: coords[1],
                d: coords[2],
            },
        });
    }
    Ok(points)
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "raw" => Some(true),
        "0" | "false" | "no" | "" => Some(false),
        _ => None,
    }
}

/// Writes normalized anchors with canonical lowercase labels.
pub fn write_anchors<W: std::io::Write>(points: &[AnchorPoint], out: W) -> Result<(), AnchorError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| AnchorError::Io(e.into());
    w.write_record(["label", "p", "a", "d"]).map_err(io)?;
    for point in points {
        w.write_record([
            point.label.as_str().to_string(),
            format!("{:?}", point.pad.p),
            format!("{:?}", point.pad.a),
            format!("{:?}", point.pad.d),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentRequest {
    pub labels: Vec<EmotionLabel>,
    pub profile_text: String,
    pub recent_memory_texts: Vec<String>,
    pub pad: PadState,
}

/// Deterministic enrichment prompt; the paragraph itself comes from the gateway.
pub fn build_enrichment_prompt(req: &EnrichmentRequest) -> String {
    let labels = req
        .labels
        .iter()
        .map(EmotionLabel::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    let mut out = String::new();
    out.push_str(&format!("[{ENRICHMENT_TEMPLATE_VERSION}]\n"));
    out.push_str("Nearest human emotion labels (nearest first): ");
    out.push_str(&labels);
    out.push('\n');
    out.push_str(&format!(
        "PAD coordinate: P={:+.3}, A={:+.3}, D={:+.3}\n\n",
        req.pad.p, req.pad.a, req.pad.d
    ));
    out.push_str("Character profile:\n");
    out.push_str(req.profile_text.trim());
    out.push_str("\n\nRecent memories:\n");
    if req.recent_memory_texts.is_empty() {
        out.push_str("none\n");
    } else {
        for m in &req.recent_memory_texts {
            out.push_str("- ");
            out.push_str(m.trim());
            out.push('\n');
        }
    }
    out.push_str(
        "\nWrite one vivid paragraph in the third person describing how this character feels \
         right now. Blend all of the labels above rather than picking one, ground the feeling in \
         the profile and the memories, and do not mention numbers or label names verbatim.\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pad(p: f64, a: f64, d: f64) -> PadState {
        PadState { p, a, d }
    }

    fn anchor(label: EmotionLabel, p: f64, a: f64, d: f64) -> AnchorPoint {
        AnchorPoint { label, pad: pad(p, a, d) }
    }

    #[test]
    fn normalize_endpoints() {
        assert_eq!(normalize_raw(0.0).unwrap(), -1.0);
        assert_eq!(normalize_raw(7.0).unwrap(), 1.0);
        assert_eq!(normalize_raw(3.5).unwrap(), 0.0);
        assert!(normalize_raw(7.01).is_err());
        assert!(normalize_raw(-0.1).is_err());
        assert!(normalize_raw(f64::NAN).is_err());
    }

    #[test]
    fn label_parsing_merges_vague() {
        assert_eq!("No Agreement".parse::<EmotionLabel>().unwrap(), EmotionLabel::Vague);
        assert_eq!("other".parse::<EmotionLabel>().unwrap(), EmotionLabel::Vague);
        assert_eq!("HAPPINESS".parse::<EmotionLabel>().unwrap(), EmotionLabel::Happiness);
        assert!("joy".parse::<EmotionLabel>().is_err());
    }

    #[test]
    fn knn_third_label_from_distances() {
        // Distances from (0.8,0.4,0.4): happiness sqrt(0.03)=0.173,
        // neutral sqrt(0.96)=0.980, anger sqrt(3.02)=1.738, sadness sqrt(4.18)=2.045.
        let set = AnchorSet::new(
            vec![
                anchor(EmotionLabel::Happiness, 0.9, 0.5, 0.5),
                anchor(EmotionLabel::Anger, -0.9, 0.6, 0.7),
                anchor(EmotionLabel::Neutral, 0.0, 0.0, 0.0),
                anchor(EmotionLabel::Sadness, -0.8, -0.5, -0.5),
            ],
            3,
        )
        .unwrap();
        assert_eq!(
            set.knn_labels(&pad(0.8, 0.4, 0.4)),
            vec![EmotionLabel::Happiness, EmotionLabel::Neutral, EmotionLabel::Anger]
        );
    }

    #[test]
    fn knn_exact_hit_and_ties() {
        let set = AnchorSet::new(
            vec![
                anchor(EmotionLabel::Fear, 0.5, 0.0, 0.0),
                anchor(EmotionLabel::Anger, -0.5, 0.0, 0.0),
                anchor(EmotionLabel::Surprise, 0.0, 0.5, 0.0),
                anchor(EmotionLabel::Sadness, 0.0, -0.5, 0.0),
            ],
            1,
        )
        .unwrap();
        assert_eq!(set.knn_labels(&pad(0.0, 0.5, 0.0)), vec![EmotionLabel::Surprise]);
        let set = set.with_k(3).unwrap();
        assert_eq!(
            set.knn_labels(&PadState::NEUTRAL),
            vec![EmotionLabel::Fear, EmotionLabel::Anger, EmotionLabel::Surprise]
        );
    }

    #[test]
    fn k_larger_than_set_is_rejected() {
        let err = AnchorSet::new(vec![anchor(EmotionLabel::Neutral, 0.0, 0.0, 0.0)], 3).unwrap_err();
        assert!(matches!(err, AnchorError::InvalidK { k: 3, n: 1 }));
        assert!(matches!(AnchorSet::new(vec![], 1), Err(AnchorError::Empty)));
    }

    #[test]
    fn parse_happy_path_and_merge() {
        let text = "label,p,a,d\nHappiness,0.5,0.2,0.1\nNo Agreement,0,0,0\nanger,-0.5,0.5,0.5\n";
        let set = parse_anchors(text, 3).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.points()[1].label, EmotionLabel::Vague);
    }

    #[test]
    fn parse_raw_directive_and_column() {
        let text = "# scale=raw07\nlabel,p,a,d\nhappiness,7,7,7\nvague,3.5,3.5,3.5\n";
        let set = parse_anchors(text, 1).unwrap();
        assert_eq!(set.points()[0].pad, pad(1.0, 1.0, 1.0));
        assert_eq!(set.points()[1].pad, PadState::NEUTRAL);

        let text = "label,p,a,d,raw\nhappiness,7,0,3.5,1\nneutral,0.1,0.2,0.3,0\n";
        let set = parse_anchors(text, 1).unwrap();
        assert_eq!(set.points()[0].pad, pad(1.0, -1.0, 0.0));
        assert_eq!(set.points()[1].pad, pad(0.1, 0.2, 0.3));
    }

    #[test]
    fn parse_errors_name_lines() {
        let text = "label,p,a,d,raw\nhappiness,1,1,1,1\nfear,9.0,1,1,1\n";
        match parse_anchors(text, 1).unwrap_err() {
            AnchorError::OutOfRange { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
        let text = "label,p,a,d\nhappiness,0.1,0.1\n";
        assert!(matches!(parse_anchors(text, 1).unwrap_err(), AnchorError::Malformed { line: 2, .. }));
        let text = "label,p,a,d\njoy,0.1,0.1,0.1\n";
        assert!(matches!(parse_anchors(text, 1).unwrap_err(), AnchorError::UnknownLabel { line: 2, .. }));
        let text = "label,p,a,d\nhappiness,abc,0.1,0.1\n";
        assert!(matches!(parse_anchors(text, 1).unwrap_err(), AnchorError::Malformed { line: 2, .. }));
        let text = "label,p,a,d\nhappiness,1.5,0.1,0.1\n";
        assert!(matches!(parse_anchors(text, 1).unwrap_err(), AnchorError::OutOfRange { line: 2, .. }));
        let text = "label,x,y,z\n";
        assert!(matches!(parse_anchors(text, 1).unwrap_err(), AnchorError::Malformed { line: 1, .. }));
        let text = "name,x,y,z\n";
        assert!(matches!(parse_anchors(text, 1).unwrap_err(), AnchorError::UnknownLabel { line: 1, .. }));
    }

    #[test]
    fn headerless_raw_rows_normalize() {
        let points = parse_raw_anchor_rows("Happiness,7,7,7\nNo Agreement,3.5,3.5,3.5\n").unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(points[0].pad, PadState::new(1.0, 1.0, 1.0));
        assert_eq!(points[1].label, EmotionLabel::Vague);
        assert_eq!(points[1].pad, PadState::NEUTRAL);
        let mut out = Vec::new();
        write_anchors(&points, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "label,p,a,d\nhappiness,1.0,1.0,1.0\nvague,0.0,0.0,0.0\n");
    }

    #[test]
    fn synthetic_set_covers_every_label() {
        let set = AnchorSet::synthetic();
        assert_eq!(set.len(), 9 * 12);
        for label in EmotionLabel::ALL {
            assert_eq!(set.points().iter().filter(|p| p.label == label).count(), 12);
        }
    }

    #[test]
    fn write_then_parse_preserves_rows() {
        let points = vec![
            anchor(EmotionLabel::Vague, 0.0, 0.0, 0.0),
            anchor(EmotionLabel::Happiness, 1.0, -1.0, 0.25),
        ];
        let mut buf = Vec::new();
        write_anchors(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "label,p,a,d\nvague,0.0,0.0,0.0\nhappiness,1.0,-1.0,0.25\n");
        assert_eq!(parse_anchor_rows(&text).unwrap(), points);
    }

    fn request(memories: Vec<&str>) -> EnrichmentRequest {
        EnrichmentRequest {
            labels: vec![EmotionLabel::Happiness, EmotionLabel::Happiness, EmotionLabel::Surprise],
            profile_text: "Tom Moreno, grocery shopkeeper. Dislikes Sam Moore.".into(),
            recent_memory_texts: memories.into_iter().map(String::from).collect(),
            pad: pad(0.72, 0.69, 0.83),
        }
    }

    #[test]
    fn prompt_contains_fragments_in_order() {
        let req = request(vec!["talked to John about the election", "opened the store"]);
        let prompt = build_enrichment_prompt(&req);
        let fragments = [
            ENRICHMENT_TEMPLATE_VERSION,
            "happiness, happiness, surprise",
            "P=+0.720, A=+0.690, D=+0.830",
            "Tom Moreno, grocery shopkeeper",
            "talked to John about the election",
            "opened the store",
        ];
        let mut cursor = 0;
        for f in fragments {
            let at = prompt[cursor..].find(f).unwrap_or_else(|| panic!("missing {f}"));
            cursor += at + f.len();
        }
        assert_eq!(prompt, build_enrichment_prompt(&req));
    }

    #[test]
    fn prompt_with_no_memories_says_none() {
        let prompt = build_enrichment_prompt(&request(vec![]));
        assert!(prompt.contains("Recent memories:\nnone\n"));
        assert!(prompt.contains("happiness, happiness, surprise"));
        assert!(prompt.contains("Tom Moreno"));
    }

    proptest! {
        #[test]
        fn normalize_round_trips_and_is_monotone(x in 0.0f64..=7.0, y in 0.0f64..=7.0) {
            let nx = normalize_raw(x).unwrap();
            prop_assert!((denormalize(nx) - x).abs() <= 1e-12);
            if x < y {
                prop_assert!(nx < normalize_raw(y).unwrap());
            }
        }
    }
}
