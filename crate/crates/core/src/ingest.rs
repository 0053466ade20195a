//! Parsing, validation, and serialization of trajectory logs, frame-stream
//! metadata, bounding-box corpora, and detection records, plus the alignment
//! of frames onto one-second motion windows.
//!
//! Wire formats (all UTF-8, LF line endings, locale-independent decimals):
//! - trajectory CSV with header `vessel_id,t,lat,lon`
//! - trajectory JSONL, one object per line with the same field names
//! - bounding-box corpus CSV with header `image_id,class,width,height`
//! - detections JSONL with fields `frame,head,class,conf,x,y,w,h`

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo_motion::{GeoError, GeoFix, MotionWindow, Trajectory};
use crate::policy::Head;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("line {line}: {field} {value} out of range (expected {expected})")]
    ValueRange {
        line: u64,
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("line {line}: duplicate timestamp {t} for vessel `{vessel_id}`")]
    DuplicateTimestamp { line: u64, vessel_id: String, t: f64 },
    #[error("line {line}: width and height must be positive, got {width} x {height}")]
    NonPositiveDimension { line: u64, width: f64, height: f64 },
    #[error("line {line}: unknown head `{token}` (expected P3, P4, or P5)")]
    UnknownHead { line: u64, token: String },
    #[error("invalid frame stream: {0}")]
    InvalidFrameStream(String),
    #[error("frame mapping requires at least one motion window")]
    EmptyWindowSequence,
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Shape of a frame stream: count, rate, and the timestamp of frame 0.
///
/// The stream's true rate is never inferred from counts and durations; it is
/// always an explicit input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameStreamMeta {
    pub frame_count: u64,
    pub fps: f64,
    pub t0: f64,
}

impl FrameStreamMeta {
    pub fn new(frame_count: u64, fps: f64, t0: f64) -> Result<Self, IngestError> {
        if frame_count == 0 {
            return Err(IngestError::InvalidFrameStream(
                "frame_count must be positive".into(),
            ));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(IngestError::InvalidFrameStream(format!(
                "fps must be positive and finite, got {fps}"
            )));
        }
        if !t0.is_finite() {
            return Err(IngestError::InvalidFrameStream(format!(
                "t0 must be finite, got {t0}"
            )));
        }
        let meta = Self { frame_count, fps, t0 };
        if !meta.duration_s().is_finite() {
            return Err(IngestError::InvalidFrameStream(
                "frame_count / fps must be finite".into(),
            ));
        }
        Ok(meta)
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count as f64 / self.fps
    }

    /// Synthesized timestamp of frame `i`: `t0 + i / fps`.
    pub fn frame_time(&self, i: u64) -> f64 {
        self.t0 + i as f64 / self.fps
    }
}

/// Total assignment of frames to motion windows: every frame maps to exactly
/// one window and the mapping is non-decreasing in the frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameWindowMap {
    window_for_frame: Vec<usize>,
}

impl FrameWindowMap {
    pub fn len(&self) -> usize {
        self.window_for_frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window_for_frame.is_empty()
    }

    pub fn window_of(&self, frame: usize) -> Option<usize> {
        self.window_for_frame.get(frame).copied()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.window_for_frame
    }

    /// `(frame_index, window_index)` pairs in frame order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.window_for_frame.iter().copied().enumerate()
    }

    /// Number of frames assigned to each of `window_count` windows.
    pub fn frames_per_window(&self, window_count: usize) -> Vec<u64> {
        let mut counts = vec![0u64; window_count];
        for &w in &self.window_for_frame {
            if let Some(c) = counts.get_mut(w) {
                *c += 1;
            }
        }
        counts
    }
}

/// One annotated bounding box of a training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBoxRecord {
    pub image_id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub width: f64,
    pub height: f64,
}

impl BBoxRecord {
    pub fn new(
        image_id: impl Into<String>,
        class_label: impl Into<String>,
        width: f64,
        height: f64,
    ) -> Result<Self, IngestError> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(IngestError::NonPositiveDimension { line: 0, width, height });
        }
        Ok(Self {
            image_id: image_id.into(),
            class_label: class_label.into(),
            width,
            height,
        })
    }
}

/// One precomputed detection, attributed to the head that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    pub head: Head,
    #[serde(rename = "class")]
    pub class_label: String,
    #[serde(rename = "conf")]
    pub confidence: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Supported trajectory log encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Csv,
    Jsonl,
}

#[derive(Deserialize)]
struct RawFixRow {
    vessel_id: String,
    t: f64,
    lat: f64,
    lon: f64,
}

fn read_source(mut source: impl Read) -> Result<String, IngestError> {
    let mut buf = String::new();
    source.read_to_string(&mut buf)?;
    Ok(buf)
}

fn validate_fix(row: RawFixRow, line: u64) -> Result<GeoFix, IngestError> {
    if !row.t.is_finite() {
        return Err(IngestError::ValueRange {
            line,
            field: "t",
            value: row.t,
            expected: "a finite timestamp",
        });
    }
    if !(row.lat.is_finite() && (-90.0..=90.0).contains(&row.lat)) {
        return Err(IngestError::ValueRange {
            line,
            field: "lat",
            value: row.lat,
            expected: "[-90, 90]",
        });
    }
    if !(row.lon.is_finite() && (-180.0..=180.0).contains(&row.lon)) {
        return Err(IngestError::ValueRange {
            line,
            field: "lon",
            value: row.lon,
            expected: "[-180, 180]",
        });
    }
    GeoFix::new(row.vessel_id, row.t, row.lat, row.lon).map_err(IngestError::from)
}

fn expect_header(headers: &csv::StringRecord, expected: &[&str], what: &str) -> Result<(), IngestError> {
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(IngestError::Schema {
            line: 1,
            message: format!(
                "{what} header must be `{}`, got `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn csv_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_f64(s: &str, line: u64, field: &'static str) -> Result<f64, IngestError> {
    s.trim().parse::<f64>().map_err(|_| IngestError::Schema {
        line,
        message: format!("cannot parse {field} from `{s}`"),
    })
}

/// Parses a trajectory log into one [`Trajectory`] per vessel, in order of
/// first appearance. Rows may arrive unordered; fixes are sorted by time.
/// Duplicate `(vessel_id, t)` rows are rejected.
pub fn parse_trajectories(
    source: impl Read,
    format: TrajectoryFormat,
) -> Result<Vec<Trajectory>, IngestError> {
    let text = read_source(source)?;
    let mut rows: Vec<(GeoFix, u64)> = Vec::new();
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    match format {
        TrajectoryFormat::Csv => {
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            expect_header(reader.headers().map_err(csv_schema)?, &["vessel_id", "t", "lat", "lon"], "trajectory CSV")?;
            for record in reader.records() {
                let record = record.map_err(csv_schema)?;
                let line = csv_line(&record);
                if record.len() != 4 {
                    return Err(IngestError::Schema {
                        line,
                        message: format!("expected 4 columns, got {}", record.len()),
                    });
                }
                let row = RawFixRow {
                    vessel_id: record[0].to_string(),
                    t: parse_f64(&record[1], line, "t")?,
                    lat: parse_f64(&record[2], line, "lat")?,
                    lon: parse_f64(&record[3], line, "lon")?,
                };
                rows.push((validate_fix(row, line)?, line));
            }
        }
        TrajectoryFormat::Jsonl => {
            for (idx, line_text) in text.lines().enumerate() {
                if line_text.trim().is_empty() {
                    continue;
                }
                let line = idx as u64 + 1;
                let row: RawFixRow = serde_json::from_str(line_text).map_err(|e| IngestError::Schema {
                    line,
                    message: e.to_string(),
                })?;
                rows.push((validate_fix(row, line)?, line));
            }
        }
    }

    // Group by vessel in first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut by_vessel: HashMap<String, Vec<(GeoFix, u64)>> = HashMap::new();
    for (fix, line) in rows {
        if !by_vessel.contains_key(&fix.vessel_id) {
            order.push(fix.vessel_id.clone());
        }
        by_vessel.entry(fix.vessel_id.clone()).or_default().push((fix, line));
    }

    let mut trajectories = Vec::with_capacity(order.len());
    for vessel_id in order {
        let mut fixes = by_vessel.remove(&vessel_id).unwrap();
        fixes.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));
        for pair in fixes.windows(2) {
            if pair[0].0.t == pair[1].0.t {
                return Err(IngestError::DuplicateTimestamp {
                    line: pair[1].1,
                    vessel_id,
                    t: pair[1].0.t,
                });
            }
        }
        let fixes = fixes.into_iter().map(|(f, _)| f).collect();
        trajectories.push(Trajectory::new(vessel_id, fixes)?);
    }
    Ok(trajectories)
}

fn csv_schema(err: csv::Error) -> IngestError {
    let line = match err.position() {
        Some(p) => p.line(),
        None => 0,
    };
    IngestError::Schema {
        line,
        message: err.to_string(),
    }
}

/// Assigns every frame to the motion window containing its timestamp.
///
/// Frames before the first window or past the last one clamp to the nearest
/// end, so the assignment is total; coverage violations worth rejecting are
/// the caller's concern.
pub fn map_frames_to_windows(
    meta: &FrameStreamMeta,
    windows: &[MotionWindow],
) -> Result<FrameWindowMap, IngestError> {
    if windows.is_empty() {
        return Err(IngestError::EmptyWindowSequence);
    }
    let mut window_for_frame = Vec::with_capacity(meta.frame_count as usize);
    for i in 0..meta.frame_count {
        let t = meta.frame_time(i);
        let after = windows.partition_point(|w| w.t_start <= t);
        let idx = after.saturating_sub(1).min(windows.len() - 1);
        window_for_frame.push(idx);
    }
    Ok(FrameWindowMap { window_for_frame })
}

/// Parses a bounding-box corpus CSV (`image_id,class,width,height`).
pub fn parse_bbox_corpus(source: impl Read) -> Result<Vec<BBoxRecord>, IngestError> {
    let text = read_source(source)?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    expect_header(reader.headers().map_err(csv_schema)?, &["image_id", "class", "width", "height"], "bounding-box CSV")?;
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_schema)?;
        let line = csv_line(&record);
        if record.len() != 4 {
            return Err(IngestError::Schema {
                line,
                message: format!("expected 4 columns, got {}", record.len()),
            });
        }
        let width = parse_f64(&record[2], line, "width")?;
        let height = parse_f64(&record[3], line, "height")?;
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(IngestError::NonPositiveDimension { line, width, height });
        }
        records.push(BBoxRecord {
            image_id: record[0].to_string(),
            class_label: record[1].to_string(),
            width,
            height,
        });
    }
    Ok(records)
}

#[derive(Deserialize)]
struct RawDetectionRow {
    frame: u64,
    head: String,
    class: String,
    conf: f64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Parses a detections JSONL stream, preserving record order.
pub fn parse_detections(source: impl Read) -> Result<Vec<DetectionRecord>, IngestError> {
    let text = read_source(source)?;
    let mut records = Vec::new();
    for (idx, line_text) in text.lines().enumerate() {
        if line_text.trim().is_empty() {
            continue;
        }
        let line = idx as u64 + 1;
        let row: RawDetectionRow = serde_json::from_str(line_text).map_err(|e| IngestError::Schema {
            line,
            message: e.to_string(),
        })?;
        let head: Head = row.head.parse().map_err(|_| IngestError::UnknownHead {
            line,
            token: row.head.clone(),
        })?;
        if !(row.conf.is_finite() && (0.0..=1.0).contains(&row.conf)) {
            return Err(IngestError::ValueRange {
                line,
                field: "conf",
                value: row.conf,
                expected: "[0, 1]",
            });
        }
        records.push(DetectionRecord {
            frame_index: row.frame,
            head,
            class_label: row.class,
            confidence: row.conf,
            x: row.x,
            y: row.y,
            w: row.w,
            h: row.h,
        });
    }
    Ok(records)
}

/// Writes trajectories as CSV (`vessel_id,t,lat,lon`), fixes in order.
pub fn write_trajectories_csv(sink: impl Write, trajectories: &[Trajectory]) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(sink);
    for trajectory in trajectories {
        for fix in trajectory.fixes() {
            writer.serialize(fix).map_err(csv_schema)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Writes trajectories as JSONL, one fix object per line.
pub fn write_trajectories_jsonl(mut sink: impl Write, trajectories: &[Trajectory]) -> Result<(), IngestError> {
    for trajectory in trajectories {
        for fix in trajectory.fixes() {
            serde_json::to_writer(&mut sink, fix).map_err(io_from_json)?;
            sink.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Writes a bounding-box corpus as CSV (`image_id,class,width,height`).
pub fn write_bbox_corpus_csv(sink: impl Write, records: &[BBoxRecord]) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(sink);
    for record in records {
        writer.serialize(record).map_err(csv_schema)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes detections as JSONL, one record per line.
pub fn write_detections_jsonl(mut sink: impl Write, records: &[DetectionRecord]) -> Result<(), IngestError> {
    for record in records {
        serde_json::to_writer(&mut sink, record).map_err(io_from_json)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

fn io_from_json(err: serde_json::Error) -> IngestError {
    IngestError::Io(std::io::Error::other(err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_motion::build_motion_windows;

    fn one_hz_csv(vessels: &[&str], seconds: usize) -> String {
        let mut s = String::from("vessel_id,t,lat,lon\n");
        for v in vessels {
            for t in 0..seconds {
                s.push_str(&format!("{v},{t},37.45,24.94\n"));
            }
        }
        s
    }

    #[test]
    fn parses_paper_shaped_log() {
        // 250 rows, two vessels, 125 fixes each.
        let csv = one_hz_csv(&["asv-1", "asv-2"], 125);
        let trajectories = parse_trajectories(csv.as_bytes(), TrajectoryFormat::Csv).unwrap();
        assert_eq!(trajectories.len(), 2);
        assert!(trajectories.iter().all(|t| t.fixes().len() == 125));
        assert_eq!(trajectories[0].vessel_id(), "asv-1");
    }

    #[test]
    fn empty_input_is_empty_not_an_error() {
        let trajectories = parse_trajectories(&b""[..], TrajectoryFormat::Csv).unwrap();
        assert!(trajectories.is_empty());
        assert!(parse_bbox_corpus(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_latitude_names_the_line() {
        let csv = "vessel_id,t,lat,lon\na,0,37.0,24.0\na,1,95.0,24.0\n";
        let err = parse_trajectories(csv.as_bytes(), TrajectoryFormat::Csv).unwrap_err();
        match err {
            IngestError::ValueRange { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "lat");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamps_are_rejected() {
        let csv = "vessel_id,t,lat,lon\na,0,37.0,24.0\na,0,37.1,24.0\n";
        let err = parse_trajectories(csv.as_bytes(), TrajectoryFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::DuplicateTimestamp { .. }));
    }

    #[test]
    fn unordered_rows_are_sorted() {
        let csv = "vessel_id,t,lat,lon\na,2,37.0,24.0\na,0,37.0,24.0\na,1,37.0,24.0\n";
        let trajectories = parse_trajectories(csv.as_bytes(), TrajectoryFormat::Csv).unwrap();
        let ts: Vec<f64> = trajectories[0].fixes().iter().map(|f| f.t).collect();
        assert_eq!(ts, [0.0, 1.0, 2.0]);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let csv = one_hz_csv(&["a", "b"], 3);
        let trajectories = parse_trajectories(csv.as_bytes(), TrajectoryFormat::Csv).unwrap();
        let mut buf = Vec::new();
        write_trajectories_jsonl(&mut buf, &trajectories).unwrap();
        let back = parse_trajectories(&buf[..], TrajectoryFormat::Jsonl).unwrap();
        assert_eq!(back, trajectories);
    }

    #[test]
    fn bad_header_is_a_schema_error() {
        let csv = "vessel,time,lat,lon\na,0,1,2\n";
        let err = parse_trajectories(csv.as_bytes(), TrajectoryFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::Schema { line: 1, .. }));
    }

    fn stationary_windows(seconds: usize) -> Vec<MotionWindow> {
        let make = |id: &str, lat: f64| {
            let fixes = (0..seconds)
                .map(|t| GeoFix::new(id, t as f64, lat, 24.0).unwrap())
                .collect();
            Trajectory::new(id, fixes).unwrap()
        };
        build_motion_windows(&make("a", 37.0), &make("b", 37.001)).unwrap()
    }

    #[test]
    fn paper_frame_mapping_counts() {
        let windows = stationary_windows(125);
        let meta = FrameStreamMeta::new(3686, 3686.0 / 125.0, 0.0).unwrap();
        let map = map_frames_to_windows(&meta, &windows).unwrap();
        let counts = map.frames_per_window(windows.len());
        assert_eq!(counts.iter().sum::<u64>(), 3686);
        assert!(counts.iter().all(|&c| c == 29 || c == 30));
        // Brute-force assignment by timestamp must agree.
        for (frame, window) in map.iter() {
            let t = meta.frame_time(frame as u64);
            let expect = windows
                .iter()
                .position(|w| w.t_start <= t && t < w.t_end)
                .unwrap_or(windows.len() - 1);
            assert_eq!(window, expect, "frame {frame}");
        }
    }

    #[test]
    fn single_window_takes_all_frames() {
        let windows = stationary_windows(1);
        let meta = FrameStreamMeta::new(10, 10.0, 0.0).unwrap();
        let map = map_frames_to_windows(&meta, &windows).unwrap();
        assert!(map.assignments().iter().all(|&w| w == 0));
    }

    #[test]
    fn tail_frames_clamp_to_last_window() {
        let windows = stationary_windows(4);
        let meta = FrameStreamMeta::new(5, 1.0, 0.0).unwrap();
        let map = map_frames_to_windows(&meta, &windows).unwrap();
        assert_eq!(map.assignments(), &[0, 1, 2, 3, 3]);
    }

    #[test]
    fn empty_window_sequence_is_an_error() {
        let meta = FrameStreamMeta::new(5, 1.0, 0.0).unwrap();
        assert!(matches!(
            map_frames_to_windows(&meta, &[]),
            Err(IngestError::EmptyWindowSequence)
        ));
    }

    #[test]
    fn bbox_corpus_counts_and_round_trip() {
        let mut csv = String::from("image_id,class,width,height\n");
        for i in 0..1510 {
            csv.push_str(&format!("img{i},ASV,40,40\n"));
        }
        let records = parse_bbox_corpus(csv.as_bytes()).unwrap();
        assert_eq!(records.len(), 1510);
        let mut buf = Vec::new();
        write_bbox_corpus_csv(&mut buf, &records).unwrap();
        assert_eq!(parse_bbox_corpus(&buf[..]).unwrap(), records);
    }

    #[test]
    fn zero_width_box_is_rejected() {
        let csv = "image_id,class,width,height\nimg0,ASV,0,40\n";
        let err = parse_bbox_corpus(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::NonPositiveDimension { line: 2, .. }));
    }

    fn detection_line(frame: u64, head: &str, conf: f64) -> String {
        format!(
            "{{\"frame\":{frame},\"head\":\"{head}\",\"class\":\"ASV\",\"conf\":{conf},\"x\":10.0,\"y\":20.0,\"w\":30.0,\"h\":40.0}}"
        )
    }

    #[test]
    fn detections_parse_per_head_counts() {
        // Head split shaped like a real per-head detection tally.
        let mut text = String::new();
        for (head, count) in [("P3", 168), ("P4", 277), ("P5", 145)] {
            for i in 0..count {
                text.push_str(&detection_line(i, head, 0.9));
                text.push('\n');
            }
        }
        let records = parse_detections(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 590);
        for (head, count) in [(Head::P3, 168), (Head::P4, 277), (Head::P5, 145)] {
            assert_eq!(records.iter().filter(|r| r.head == head).count(), count);
        }
    }

    #[test]
    fn detection_confidence_out_of_range() {
        let text = detection_line(0, "P3", 1.3);
        let err = parse_detections(text.as_bytes()).unwrap_err();
        assert!(matches!(err, IngestError::ValueRange { field: "conf", .. }));
    }

    #[test]
    fn detection_unknown_head() {
        let text = detection_line(0, "P9", 0.9);
        let err = parse_detections(text.as_bytes()).unwrap_err();
        match err {
            IngestError::UnknownHead { line, token } => {
                assert_eq!(line, 1);
                assert_eq!(token, "P9");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn detections_round_trip_is_exact() {
        let text = [detection_line(3, "P4", 0.5), detection_line(4, "P5", 0.25)].join("\n");
        let records = parse_detections(text.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_detections_jsonl(&mut buf, &records).unwrap();
        assert_eq!(parse_detections(&buf[..]).unwrap(), records);
    }
}
