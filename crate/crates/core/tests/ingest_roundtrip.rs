use std::collections::BTreeMap;
use std::io::Cursor;

use engage::ingest::{
    clip_frame_census, parse_feature_stream, parse_label_table, parse_split_manifest, write_feature_stream,
    write_label_table, write_split_manifest, CensusThreshold, IngestError, ParseOptions, EMOTION_COUNT,
};
use engage::{AffectiveLabels, Clip, Dataset, EmotionVector, FrameRecord, SplitName};
use proptest::prelude::*;

fn simplex() -> impl Strategy<Value = [f64; EMOTION_COUNT]> {
    prop::array::uniform7(0.0f64..1.0).prop_filter_map("non-zero mass", |raw| {
        let sum: f64 = raw.iter().sum();
        (sum > 1e-3).then(|| raw.map(|x| x / sum))
    })
}

fn clip_strategy(id: String) -> impl Strategy<Value = Clip> {
    prop::collection::vec((1u64..4, prop::option::weighted(0.8, simplex())), 1..12).prop_map(move |steps| {
        let mut index = 0;
        let frames = steps
            .into_iter()
            .map(|(gap, scores)| {
                index += gap;
                FrameRecord {
                    clip_id: id.clone(),
                    frame_index: index,
                    timestamp_ms: index * 33,
                    emotions: scores.map(|s| EmotionVector::new(s, true).unwrap()),
                }
            })
            .collect();
        Clip {
            clip_id: id.clone(),
            frames,
        }
    })
}

fn clips_strategy() -> impl Strategy<Value = Vec<Clip>> {
    (1usize..5).prop_flat_map(|n| (0..n).map(|i| clip_strategy(format!("clip{i}"))).collect::<Vec<_>>())
}

proptest! {
    #[test]
    fn feature_stream_round_trips(clips in clips_strategy()) {
        let mut bytes = Vec::new();
        write_feature_stream(&clips, &mut bytes).unwrap();
        let parsed = parse_feature_stream(Cursor::new(&bytes), &ParseOptions::default()).unwrap();
        prop_assert_eq!(parsed, clips);
    }

    #[test]
    fn interleaved_lines_are_grouped(clips in clips_strategy()) {
        let mut per_clip: Vec<Vec<String>> = clips
            .iter()
            .map(|c| {
                let mut buf = Vec::new();
                write_feature_stream(std::slice::from_ref(c), &mut buf).unwrap();
                String::from_utf8(buf).unwrap().lines().map(str::to_string).collect()
            })
            .collect();
        // round-robin interleave keeps each clip's frame order
        let mut text = String::new();
        while per_clip.iter().any(|l| !l.is_empty()) {
            for lines in &mut per_clip {
                if !lines.is_empty() {
                    text.push_str(&lines.remove(0));
                    text.push('\n');
                }
            }
        }
        let parsed = parse_feature_stream(Cursor::new(text), &ParseOptions::default()).unwrap();
        prop_assert_eq!(parsed, clips);
    }

    #[test]
    fn label_table_round_trips(tuples in prop::collection::vec((0u8..4, 0u8..4, 0u8..4, 0u8..4), 0..20)) {
        let table: BTreeMap<String, AffectiveLabels> = tuples
            .into_iter()
            .enumerate()
            .map(|(i, (b, e, c, f))| (format!("{i:04}.avi"), AffectiveLabels::new(b, e, c, f).unwrap()))
            .collect();
        let mut bytes = Vec::new();
        write_label_table(&table, &mut bytes).unwrap();
        prop_assert_eq!(parse_label_table(Cursor::new(bytes)).unwrap(), table);
    }

    #[test]
    fn census_matches_direct_count(lengths in prop::collection::vec(0usize..400, 0..30)) {
        let clips: Vec<Clip> = lengths.iter().enumerate().map(|(i, &n)| sized_clip(&format!("c{i}"), n)).collect();
        let census = clip_frame_census(&clips);
        for (threshold, count) in &census.rows {
            let expected = lengths
                .iter()
                .filter(|&&n| match threshold {
                    CensusThreshold::MoreThan(t) => n > *t,
                    CensusThreshold::AtLeast(t) => n >= *t,
                })
                .count();
            prop_assert_eq!(*count, expected);
        }
    }
}

fn sized_clip(id: &str, faces: usize) -> Clip {
    let uniform = EmotionVector::new([1.0 / 7.0; EMOTION_COUNT], true).unwrap();
    Clip {
        clip_id: id.to_string(),
        frames: (0..faces as u64)
            .map(|i| FrameRecord {
                clip_id: id.to_string(),
                frame_index: i,
                timestamp_ms: i * 33,
                emotions: Some(uniform),
            })
            .collect(),
    }
}

#[test]
fn census_of_three_clips() {
    let clips = [sized_clip("a", 50), sized_clip("b", 150), sized_clip("c", 310)];
    let census = clip_frame_census(&clips);
    let counts: Vec<usize> = census.rows.iter().map(|(_, n)| *n).collect();
    assert_eq!(counts, [1, 1, 1, 2, 2, 3]);
}

#[test]
fn census_ignores_faceless_frames() {
    let mut clip = sized_clip("a", 100);
    for frame in clip.frames.iter_mut().step_by(2) {
        frame.emotions = None;
    }
    let census = clip_frame_census([&clip]);
    assert_eq!(census.count(CensusThreshold::AtLeast(60)), Some(0));
    assert_eq!(census.count(CensusThreshold::AtLeast(40)), Some(1));
}

#[test]
fn malformed_stream_reports_line_number() {
    let text = "\
{\"clip_id\":\"a\",\"frame_index\":0,\"timestamp_ms\":0,\"face_present\":false}
{\"clip_id\":\"a\",\"frame_index\":1,\"timestamp_ms\":33,\"face_present\":true,\"emotions\":[0.5,0.5,0,0,0,0,0.1]}
";
    let err = parse_feature_stream(Cursor::new(text), &ParseOptions::default()).unwrap_err();
    assert!(matches!(err, IngestError::ScoreNotNormalized { line: 2, .. }), "{err}");

    let relaxed = ParseOptions {
        require_normalized: false,
    };
    assert!(parse_feature_stream(Cursor::new(text), &relaxed).is_ok());
}

#[test]
fn dataset_requires_stream_and_label_for_every_split_clip() {
    let clips = vec![sized_clip("a", 3)];
    let labels = BTreeMap::from([("a".to_string(), AffectiveLabels::new(0, 2, 0, 0).unwrap())]);
    let mut splits = BTreeMap::from([("a".to_string(), SplitName::Train)]);
    assert!(Dataset::assemble(clips.clone(), labels.clone(), splits.clone()).is_ok());

    splits.insert("b".to_string(), SplitName::Test);
    assert!(matches!(
        Dataset::assemble(clips, labels, splits),
        Err(IngestError::MissingStream(id)) if id == "b"
    ));
}

#[test]
fn split_manifest_round_trips() {
    let manifest = BTreeMap::from([
        ("x".to_string(), SplitName::Train),
        ("y".to_string(), SplitName::Validation),
        ("z".to_string(), SplitName::Test),
    ]);
    let mut bytes = Vec::new();
    write_split_manifest(&manifest, &mut bytes).unwrap();
    assert_eq!(String::from_utf8(bytes.clone()).unwrap().lines().next(), Some("ClipID,Split"));
    assert_eq!(parse_split_manifest(Cursor::new(bytes)).unwrap(), manifest);
}
