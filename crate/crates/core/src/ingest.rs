//! Parsing and validation of the on-disk interchange formats.
//!
//! Three inputs describe a dataset:
//!
//! * a JSON Lines feature stream, one object per captured frame:
//!   `{"clip_id":"c1","frame_index":0,"timestamp_ms":0,"face_present":true,"emotions":[...]}`
//!   where `emotions` holds seven scores in canonical order (see [`Emotion::ALL`])
//!   and is present iff `face_present` is true;
//! * a label table, CSV with header `ClipID,Boredom,Engagement,Confusion,Frustration`;
//! * a split manifest, CSV with header `ClipID,Split`, `Split` one of
//!   `train`, `validation`, `test`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of emotion channels produced per frame.
pub const EMOTION_COUNT: usize = 7;

/// Allowed deviation of a normalized score vector's sum from 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

pub const FEATURES_FILE: &str = "features.jsonl";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLITS_FILE: &str = "splits.csv";

const LABEL_COLUMNS: [&str; 5] = ["ClipID", "Boredom", "Engagement", "Confusion", "Frustration"];
const SPLIT_COLUMNS: [&str; 2] = ["ClipID", "Split"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("line {line}: frame_index {found} of clip '{clip_id}' does not follow {previous}")]
    NonMonotoneFrameIndex {
        line: u64,
        clip_id: String,
        previous: u64,
        found: u64,
    },
    #[error("line {line}: {emotion} score {value} outside [0, 1]")]
    ScoreOutOfRange { line: u64, emotion: Emotion, value: f64 },
    #[error("line {line}: emotion scores sum to {sum}, expected 1 within {SIMPLEX_TOLERANCE}")]
    ScoreNotNormalized { line: u64, sum: f64 },
    #[error("line {line}: duplicate clip '{clip_id}'")]
    DuplicateClip { line: u64, clip_id: String },
    #[error("line {line}: {column} severity {value} outside 0..=3")]
    SeverityOutOfRange {
        line: u64,
        column: &'static str,
        value: i64,
    },
    #[error("missing column '{0}'")]
    MissingColumn(&'static str),
    #[error("line {line}: unknown split '{value}'")]
    UnknownSplit { line: u64, value: String },
    #[error("clip '{0}' is listed in the split manifest but has no feature stream")]
    MissingStream(String),
    #[error("clip '{0}' is listed in the split manifest but has no label row")]
    MissingLabel(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The seven facial emotions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Happy,
    Neutral,
    Surprised,
    Disgusted,
    Angry,
    Fearful,
    Sad,
}

impl Emotion {
    pub const ALL: [Emotion; EMOTION_COUNT] = [
        Emotion::Happy,
        Emotion::Neutral,
        Emotion::Surprised,
        Emotion::Disgusted,
        Emotion::Angry,
        Emotion::Fearful,
        Emotion::Sad,
    ];

    /// Position in the canonical order.
    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Neutral => "neutral",
            Emotion::Surprised => "surprised",
            Emotion::Disgusted => "disgusted",
            Emotion::Angry => "angry",
            Emotion::Fearful => "fearful",
            Emotion::Sad => "sad",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| format!("unknown emotion '{s}'"))
    }
}

/// Parse a comma-separated emotion list. `none` and the empty string mean no emotions.
pub fn parse_emotion_set(s: &str) -> Result<BTreeSet<Emotion>, String> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(BTreeSet::new());
    }
    s.split([',', ';']).map(str::parse).collect()
}

/// Render an emotion set as `a;b`, or `none` when empty.
pub fn format_emotion_set(set: &BTreeSet<Emotion>) -> String {
    if set.is_empty() {
        "none".to_string()
    } else {
        set.iter().map(|e| e.name()).collect::<Vec<_>>().join(";")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmotionError {
    OutOfRange { emotion: Emotion, value: f64 },
    NotNormalized { sum: f64 },
}

/// One frame's emotion scores in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionVector {
    scores: [f64; EMOTION_COUNT],
}

impl EmotionVector {
    /// Validates range and, when `require_normalized`, that the scores sum to one.
    pub fn new(scores: [f64; EMOTION_COUNT], require_normalized: bool) -> Result<Self, EmotionError> {
        for (emotion, &value) in Emotion::ALL.iter().zip(&scores) {
            if !(0.0..=1.0).contains(&value) {
                return Err(EmotionError::OutOfRange {
                    emotion: *emotion,
                    value,
                });
            }
        }
        if require_normalized {
            let sum: f64 = scores.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
                return Err(EmotionError::NotNormalized { sum });
            }
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &[f64; EMOTION_COUNT] {
        &self.scores
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        self.scores[emotion.index()]
    }
}

/// A single captured frame of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub clip_id: String,
    pub frame_index: u64,
    pub timestamp_ms: u64,
    /// Present iff a face was detected in the frame.
    pub emotions: Option<EmotionVector>,
}

impl FrameRecord {
    pub fn face_present(&self) -> bool {
        self.emotions.is_some()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFrame {
    clip_id: String,
    frame_index: u64,
    timestamp_ms: u64,
    face_present: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emotions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Reject score vectors that do not sum to one.
    pub require_normalized: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            require_normalized: true,
        }
    }
}

/// All frames of one clip, ordered by `frame_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub clip_id: String,
    pub frames: Vec<FrameRecord>,
}

impl Clip {
    pub fn face_count(&self) -> usize {
        self.frames.iter().filter(|f| f.face_present()).count()
    }

    /// Emotion vectors of face-bearing frames, in capture order.
    pub fn face_emotions(&self) -> impl Iterator<Item = &EmotionVector> {
        self.frames.iter().filter_map(|f| f.emotions.as_ref())
    }

    /// Drop frames without a detected face.
    pub fn retain_faces(mut self) -> Self {
        self.frames.retain(FrameRecord::face_present);
        self
    }
}

fn parse_frame_line(text: &str, line: u64, opts: &ParseOptions) -> Result<FrameRecord, IngestError> {
    let malformed = |reason: String| IngestError::MalformedRecord { line, reason };
    let wire: WireFrame = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let emotions = match (wire.face_present, wire.emotions) {
        (true, None) => return Err(malformed("face_present is true but emotions are missing".into())),
        (false, Some(_)) => return Err(malformed("face_present is false but emotions are given".into())),
        (false, None) => None,
        (true, Some(values)) => {
            let scores: [f64; EMOTION_COUNT] = values.as_slice().try_into().map_err(|_| {
                malformed(format!("expected {EMOTION_COUNT} emotion scores, found {}", values.len()))
            })?;
            let vector = EmotionVector::new(scores, opts.require_normalized).map_err(|e| match e {
                EmotionError::OutOfRange { emotion, value } => IngestError::ScoreOutOfRange { line, emotion, value },
                EmotionError::NotNormalized { sum } => IngestError::ScoreNotNormalized { line, sum },
            })?;
            Some(vector)
        }
    };
    Ok(FrameRecord {
        clip_id: wire.clip_id,
        frame_index: wire.frame_index,
        timestamp_ms: wire.timestamp_ms,
        emotions,
    })
}

/// Parse a JSON Lines feature stream into clips sorted by `clip_id`.
///
/// Lines of different clips may interleave, but within a clip `frame_index`
/// must strictly increase in file order. Blank lines are ignored. Errors name
/// the 1-based line number of the offending record.
pub fn parse_feature_stream<R: BufRead>(source: R, opts: &ParseOptions) -> Result<Vec<Clip>, IngestError> {
    let mut clips: BTreeMap<String, Vec<FrameRecord>> = BTreeMap::new();
    for (idx, text) in source.lines().enumerate() {
        let text = text?;
        let line = idx as u64 + 1;
        if text.trim().is_empty() {
            continue;
        }
        let record = parse_frame_line(&text, line, opts)?;
        let frames = clips.entry(record.clip_id.clone()).or_default();
        if let Some(last) = frames.last() {
            if record.frame_index <= last.frame_index {
                return Err(IngestError::NonMonotoneFrameIndex {
                    line,
                    clip_id: record.clip_id,
                    previous: last.frame_index,
                    found: record.frame_index,
                });
            }
        }
        frames.push(record);
    }
    Ok(clips
        .into_iter()
        .map(|(clip_id, frames)| Clip { clip_id, frames })
        .collect())
}

/// Serialize clips back into the interchange format, clip by clip.
pub fn write_feature_stream<W: Write>(clips: &[Clip], mut out: W) -> io::Result<()> {
    for frame in clips.iter().flat_map(|c| &c.frames) {
        let wire = WireFrame {
            clip_id: frame.clip_id.clone(),
            frame_index: frame.frame_index,
            timestamp_ms: frame.timestamp_ms,
            face_present: frame.face_present(),
            emotions: frame.emotions.map(|e| e.scores().to_vec()),
        };
        serde_json::to_writer(&mut out, &wire)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Four affective-state severities of one clip, each in `0..=3`
/// (very low, low, high, very high).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AffectiveLabels {
    boredom: u8,
    engagement: u8,
    confusion: u8,
    frustration: u8,
}

impl AffectiveLabels {
    pub const MAX_SEVERITY: u8 = 3;

    /// Arguments follow the label-table column order.
    pub fn new(boredom: u8, engagement: u8, confusion: u8, frustration: u8) -> Option<Self> {
        [boredom, engagement, confusion, frustration]
            .iter()
            .all(|&s| s <= Self::MAX_SEVERITY)
            .then_some(Self {
                boredom,
                engagement,
                confusion,
                frustration,
            })
    }

    pub const fn boredom(&self) -> u8 {
        self.boredom
    }
    pub const fn engagement(&self) -> u8 {
        self.engagement
    }
    pub const fn confusion(&self) -> u8 {
        self.confusion
    }
    pub const fn frustration(&self) -> u8 {
        self.frustration
    }

    /// Every one of the 256 severity tuples, boredom varying slowest.
    pub fn all_tuples() -> impl Iterator<Item = AffectiveLabels> {
        (0..4u8).flat_map(|b| {
            (0..4u8).flat_map(move |e| {
                (0..4u8).flat_map(move |c| (0..4u8).map(move |f| AffectiveLabels::new(b, e, c, f).unwrap()))
            })
        })
    }
}

fn column_positions<const N: usize>(
    headers: &csv::StringRecord,
    names: [&'static str; N],
) -> Result<[usize; N], IngestError> {
    let mut positions = [0; N];
    for (slot, name) in positions.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(IngestError::MissingColumn(name))?;
    }
    Ok(positions)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Parse a label table keyed by clip id.
pub fn parse_label_table<R: Read>(source: R) -> Result<BTreeMap<String, AffectiveLabels>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let cols = column_positions(reader.headers()?, LABEL_COLUMNS)?;
    let mut table = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let clip_id = record[cols[0]].to_string();
        let mut severities = [0u8; 4];
        for (k, slot) in severities.iter_mut().enumerate() {
            let column = LABEL_COLUMNS[k + 1];
            let raw = &record[cols[k + 1]];
            let value: i64 = raw.parse().map_err(|_| IngestError::MalformedRecord {
                line,
                reason: format!("{column} value '{raw}' is not an integer"),
            })?;
            if !(0..=i64::from(AffectiveLabels::MAX_SEVERITY)).contains(&value) {
                return Err(IngestError::SeverityOutOfRange { line, column, value });
            }
            *slot = value as u8;
        }
        let [b, e, c, f] = severities;
        let labels = AffectiveLabels::new(b, e, c, f).expect("severities range-checked");
        if table.insert(clip_id.clone(), labels).is_some() {
            return Err(IngestError::DuplicateClip { line, clip_id });
        }
    }
    Ok(table)
}

pub fn write_label_table<W: Write>(table: &BTreeMap<String, AffectiveLabels>, out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(LABEL_COLUMNS)?;
    for (clip_id, l) in table {
        writer.write_record([
            clip_id.clone(),
            l.boredom.to_string(),
            l.engagement.to_string(),
            l.confusion.to_string(),
            l.frustration.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Validation, SplitName::Test];

    pub const fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SplitName::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| format!("unknown split '{s}'"))
    }
}

/// Parse a split manifest keyed by clip id.
pub fn parse_split_manifest<R: Read>(source: R) -> Result<BTreeMap<String, SplitName>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let cols = column_positions(reader.headers()?, SPLIT_COLUMNS)?;
    let mut manifest = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let clip_id = record[cols[0]].to_string();
        let split = record[cols[1]].parse().map_err(|_| IngestError::UnknownSplit {
            line,
            value: record[cols[1]].to_string(),
        })?;
        if manifest.insert(clip_id.clone(), split).is_some() {
            return Err(IngestError::DuplicateClip { line, clip_id });
        }
    }
    Ok(manifest)
}

pub fn write_split_manifest<W: Write>(manifest: &BTreeMap<String, SplitName>, out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SPLIT_COLUMNS)?;
    for (clip_id, split) in manifest {
        writer.write_record([clip_id.as_str(), split.name()])?;
    }
    writer.flush()?;
    Ok(())
}

/// The clips assigned to one partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub clip_ids: Vec<String>,
}

/// Feature streams, labels and partition for every clip named in a manifest.
///
/// Clips keep only their face-bearing frames. Each split is disjoint from the
/// others by construction because the manifest maps each clip to one split.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    clips: BTreeMap<String, Clip>,
    labels: BTreeMap<String, AffectiveLabels>,
    splits: BTreeMap<String, SplitName>,
}

impl Dataset {
    pub fn assemble(
        clips: impl IntoIterator<Item = Clip>,
        labels: BTreeMap<String, AffectiveLabels>,
        splits: BTreeMap<String, SplitName>,
    ) -> Result<Self, IngestError> {
        let mut by_id: BTreeMap<String, Clip> = clips.into_iter().map(|c| (c.clip_id.clone(), c)).collect();
        let mut kept_clips = BTreeMap::new();
        let mut kept_labels = BTreeMap::new();
        for clip_id in splits.keys() {
            let clip = by_id
                .remove(clip_id)
                .ok_or_else(|| IngestError::MissingStream(clip_id.clone()))?;
            let label = *labels
                .get(clip_id)
                .ok_or_else(|| IngestError::MissingLabel(clip_id.clone()))?;
            kept_clips.insert(clip_id.clone(), clip.retain_faces());
            kept_labels.insert(clip_id.clone(), label);
        }
        Ok(Self {
            clips: kept_clips,
            labels: kept_labels,
            splits,
        })
    }

    /// Load `features.jsonl`, `labels.csv` and `splits.csv` from `dir`.
    pub fn load_dir(dir: &Path, opts: &ParseOptions) -> Result<Self, IngestError> {
        let clips = parse_feature_stream(BufReader::new(File::open(dir.join(FEATURES_FILE))?), opts)?;
        let labels = parse_label_table(File::open(dir.join(LABELS_FILE))?)?;
        let splits = parse_split_manifest(File::open(dir.join(SPLITS_FILE))?)?;
        Self::assemble(clips, labels, splits)
    }

    pub fn clips(&self) -> &BTreeMap<String, Clip> {
        &self.clips
    }

    pub fn labels(&self) -> &BTreeMap<String, AffectiveLabels> {
        &self.labels
    }

    pub fn split_of(&self, clip_id: &str) -> Option<SplitName> {
        self.splits.get(clip_id).copied()
    }

    pub fn split(&self, name: SplitName) -> DatasetSplit {
        DatasetSplit {
            name,
            clip_ids: self
                .splits
                .iter()
                .filter(|(_, s)| **s == name)
                .map(|(id, _)| id.clone())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// A frame-count threshold of the census table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensusThreshold {
    MoreThan(usize),
    AtLeast(usize),
}

impl CensusThreshold {
    pub fn admits(self, frames: usize) -> bool {
        match self {
            CensusThreshold::MoreThan(t) => frames > t,
            CensusThreshold::AtLeast(t) => frames >= t,
        }
    }
}

impl fmt::Display for CensusThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CensusThreshold::MoreThan(t) => write!(f, ">{t}"),
            CensusThreshold::AtLeast(t) => write!(f, ">={t}"),
        }
    }
}

pub const CENSUS_THRESHOLDS: [CensusThreshold; 6] = [
    CensusThreshold::MoreThan(300),
    CensusThreshold::AtLeast(300),
    CensusThreshold::AtLeast(200),
    CensusThreshold::AtLeast(100),
    CensusThreshold::AtLeast(60),
    CensusThreshold::AtLeast(40),
];

/// Number of clips whose face-bearing frame count meets each threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameCensus {
    pub rows: Vec<(CensusThreshold, usize)>,
}

impl FrameCensus {
    pub fn count(&self, threshold: CensusThreshold) -> Option<usize> {
        self.rows.iter().find(|(t, _)| *t == threshold).map(|(_, n)| *n)
    }
}

impl fmt::Display for FrameCensus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<8}", "Frames")?;
        for (t, _) in &self.rows {
            write!(f, " {:>7}", t.to_string())?;
        }
        write!(f, "\n{:<8}", "Videos")?;
        for (_, n) in &self.rows {
            write!(f, " {n:>7}")?;
        }
        writeln!(f)
    }
}

pub fn clip_frame_census<'a>(clips: impl IntoIterator<Item = &'a Clip>) -> FrameCensus {
    let mut rows: Vec<(CensusThreshold, usize)> = CENSUS_THRESHOLDS.iter().map(|&t| (t, 0)).collect();
    for clip in clips {
        let n = clip.face_count();
        for (t, count) in &mut rows {
            if t.admits(n) {
                *count += 1;
            }
        }
    }
    FrameCensus { rows }
}
