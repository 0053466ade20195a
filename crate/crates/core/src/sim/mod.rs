//! End-to-end adaptive-inference replay: drive the head-selection policy over
//! motion windows, account per-frame latency through a detector profile,
//! optionally replay precomputed detections, and aggregate a report.
//!
//! Runs are deterministic: identical inputs produce byte-identical reports,
//! timelines, and decision logs.

pub mod fixture;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{self, CostModelError, DetectorProfile};
use crate::geo_motion::{self, GeoError, MotionWindow, Trajectory};
use crate::ingest::{self, DetectionRecord, FrameStreamMeta, IngestError};
use crate::policy::{self, HeadSelection, PolicyConfig, PolicyError};

/// Frames may start up to this many seconds before the first motion window
/// (or run past the last one) and still clamp to it; larger gaps are coverage
/// errors rather than silent truncation.
pub const COVERAGE_SLACK_S: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Cost(#[from] CostModelError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("need at least two vessels, got {0}")]
    TooFewVessels(usize),
    #[error("duplicate vessel id `{0}`")]
    DuplicateVesselId(String),
    #[error(
        "frame stream is not covered by the trajectory overlap: frames begin {head_gap_s:.3} s \
         before the first motion window and end {tail_gap_s:.3} s after the last; at most \
         {COVERAGE_SLACK_S} s of clamped slack is allowed on either side"
    )]
    Coverage { head_gap_s: f64, tail_gap_s: f64 },
}

/// A detector stand-in: given a frame and the active head selection, produce
/// the detections attributable to the selected heads.
pub trait DetectorBackend {
    fn detections_for(&self, frame_index: u64, selection: &HeadSelection) -> Vec<DetectionRecord>;
}

/// Backend for cost-only runs; never produces detections.
#[derive(Debug, Default, Clone, Copy)]
pub struct CostOnlyBackend;

impl DetectorBackend for CostOnlyBackend {
    fn detections_for(&self, _frame_index: u64, _selection: &HeadSelection) -> Vec<DetectionRecord> {
        Vec::new()
    }
}

/// Replays precomputed detections, keeping exactly those whose head is in the
/// active selection, in their original order.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    by_frame: BTreeMap<u64, Vec<DetectionRecord>>,
}

impl ReplayBackend {
    pub fn new(records: Vec<DetectionRecord>) -> Self {
        let mut by_frame: BTreeMap<u64, Vec<DetectionRecord>> = BTreeMap::new();
        for record in records {
            by_frame.entry(record.frame_index).or_default().push(record);
        }
        Self { by_frame }
    }
}

impl DetectorBackend for ReplayBackend {
    fn detections_for(&self, frame_index: u64, selection: &HeadSelection) -> Vec<DetectionRecord> {
        match self.by_frame.get(&frame_index) {
            Some(records) => records
                .iter()
                .filter(|r| selection.contains(r.head))
                .cloned()
                .collect(),
            None => Vec::new(),
        }
    }
}

/// Everything decided for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub frame_index: u64,
    pub window_index: usize,
    pub selection: HeadSelection,
    pub latency_ms: f64,
    pub d_t: f64,
    pub v_t: f64,
    pub detections: Vec<DetectionRecord>,
}

/// Per-window row of the exported timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTimelineEntry {
    pub window: usize,
    pub t_start: f64,
    pub d_m: f64,
    pub v_mps: f64,
    pub heads: HeadSelection,
}

/// Aggregate outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub frame_count: u64,
    pub frames_low: u64,
    pub frames_full: u64,
    pub total_latency_ms: f64,
    /// Projected cost of running the full model on every frame.
    pub full_model_baseline_ms: f64,
    pub latency_saving_pct: f64,
    pub per_window_timeline: Vec<WindowTimelineEntry>,
}

/// A report plus the per-frame decision log behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub report: SimulationReport,
    pub decisions: Vec<FrameDecision>,
}

/// Minimum-distance aggregate over all vessel pairs at one window start.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAggregate {
    /// Minimum pairwise distance, in meters.
    pub d_m: f64,
    /// Closure rate of the minimizing pair over the preceding second; `None`
    /// when that pair lacks coverage one second earlier.
    pub v_mps: Option<f64>,
    /// The minimizing pair, lexicographically ordered (ties broken toward
    /// the lexicographically smallest pair).
    pub pair: (String, String),
    /// True when any sample involved was interpolated across a gap.
    pub over_gap: bool,
}

fn sorted_refs<'a>(trajectories: &'a [&'a Trajectory]) -> Result<Vec<&'a Trajectory>, SimError> {
    if trajectories.len() < 2 {
        return Err(SimError::TooFewVessels(trajectories.len()));
    }
    let mut sorted: Vec<&Trajectory> = trajectories.to_vec();
    sorted.sort_by(|a, b| a.vessel_id().cmp(b.vessel_id()));
    for pair in sorted.windows(2) {
        if pair[0].vessel_id() == pair[1].vessel_id() {
            return Err(SimError::DuplicateVesselId(pair[0].vessel_id().to_string()));
        }
    }
    Ok(sorted)
}

fn aggregate_at(sorted: &[&Trajectory], t: f64) -> Result<PairAggregate, SimError> {
    let mut samples = Vec::with_capacity(sorted.len());
    let mut any_gap = false;
    for trajectory in sorted {
        let sample = trajectory.position_at(t)?;
        any_gap |= sample.over_gap;
        samples.push(sample);
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..sorted.len() {
        for j in (i + 1)..sorted.len() {
            let d = geo_motion::haversine_m(samples[i].lat, samples[i].lon, samples[j].lat, samples[j].lon)?;
            // Strict `<` keeps the lexicographically first minimal pair,
            // since pairs are enumerated in sorted vessel-id order.
            if best.map_or(true, |(min_d, _, _)| d < min_d) {
                best = Some((d, i, j));
            }
        }
    }
    let (d_m, i, j) = best.expect("at least one pair");
    let (a, b) = (sorted[i], sorted[j]);
    let v_mps = match (a.position_at(t - 1.0), b.position_at(t - 1.0)) {
        (Ok(pa), Ok(pb)) => {
            any_gap |= pa.over_gap || pb.over_gap;
            let d_prev = geo_motion::haversine_m(pa.lat, pa.lon, pb.lat, pb.lon)?;
            Some(geo_motion::closure_rate(d_prev, d_m, 1.0)?)
        }
        _ => None,
    };
    Ok(PairAggregate {
        d_m,
        v_mps,
        pair: (a.vessel_id().to_string(), b.vessel_id().to_string()),
        over_gap: any_gap,
    })
}

/// The scalar motion cues for a set of vessels at window start `t`: the
/// minimum pairwise distance and the closure rate of the minimizing pair.
/// Generalizes the two-vessel case, to which it reduces exactly.
pub fn aggregate_pairs(trajectories: &[Trajectory], t: f64) -> Result<PairAggregate, SimError> {
    let refs: Vec<&Trajectory> = trajectories.iter().collect();
    let sorted = sorted_refs(&refs)?;
    aggregate_at(&sorted, t)
}

fn build_aggregate_windows(sorted: &[&Trajectory]) -> Result<Vec<MotionWindow>, SimError> {
    let t_lo = sorted
        .iter()
        .map(|t| t.first_t())
        .fold(f64::NEG_INFINITY, f64::max);
    let t_hi = sorted
        .iter()
        .map(|t| t.last_t())
        .fold(f64::INFINITY, f64::min);
    let overlap_s = t_hi + 1.0 - t_lo;
    if overlap_s <= 0.0 {
        return Err(GeoError::NoOverlap.into());
    }
    if overlap_s < 1.0 {
        return Err(GeoError::DegenerateOverlap { secs: overlap_s }.into());
    }
    let count = overlap_s.floor() as usize;
    let mut windows = Vec::with_capacity(count);
    for k in 0..count {
        let t = t_lo + k as f64;
        let agg = aggregate_at(sorted, t)?;
        let (v_t, valid_v) = match agg.v_mps {
            Some(v) if k > 0 => (v, true),
            _ => (0.0, false),
        };
        windows.push(MotionWindow::new(k, t, agg.d_m, v_t, valid_v, !agg.over_gap)?);
    }
    Ok(windows)
}

fn build_windows_refs(trajectories: &[&Trajectory]) -> Result<Vec<MotionWindow>, SimError> {
    let sorted = sorted_refs(trajectories)?;
    if sorted.len() == 2 {
        Ok(geo_motion::build_motion_windows(sorted[0], sorted[1])?)
    } else {
        build_aggregate_windows(&sorted)
    }
}

/// Motion windows for a vessel set: the pairwise construction for exactly
/// two vessels, the minimum-pair aggregation beyond that.
pub fn build_windows(trajectories: &[Trajectory]) -> Result<Vec<MotionWindow>, SimError> {
    let refs: Vec<&Trajectory> = trajectories.iter().collect();
    build_windows_refs(&refs)
}

fn run_refs(
    trajectories: &[&Trajectory],
    meta: &FrameStreamMeta,
    cfg: &PolicyConfig,
    profile: &DetectorProfile,
    backend: &dyn DetectorBackend,
) -> Result<SimulationRun, SimError> {
    cfg.validate()?;
    let windows = build_windows_refs(trajectories)?;

    let head_gap_s = (windows[0].t_start - meta.t0).max(0.0);
    let video_end = meta.t0 + meta.duration_s();
    let tail_gap_s = (video_end - windows[windows.len() - 1].t_end).max(0.0);
    if head_gap_s > COVERAGE_SLACK_S || tail_gap_s > COVERAGE_SLACK_S {
        return Err(SimError::Coverage { head_gap_s, tail_gap_s });
    }

    let map = ingest::map_frames_to_windows(meta, &windows)?;
    let timeline = policy::selection_timeline(&windows, &map, cfg)?;
    let window_latency: Vec<f64> = timeline
        .per_window
        .iter()
        .map(|d| cost_model::latency_for(&d.selection, profile))
        .collect::<Result<_, _>>()?;

    let mut decisions = Vec::with_capacity(meta.frame_count as usize);
    let mut total_latency_ms = 0.0;
    let mut frames_low = 0u64;
    let mut frames_full = 0u64;
    for (frame, window_index) in map.iter() {
        let decision = &timeline.per_window[window_index];
        let window = &windows[window_index];
        let latency_ms = window_latency[window_index];
        total_latency_ms += latency_ms;
        if decision.easy {
            frames_low += 1;
        } else {
            frames_full += 1;
        }
        let frame_index = frame as u64;
        decisions.push(FrameDecision {
            frame_index,
            window_index,
            selection: decision.selection,
            latency_ms,
            d_t: window.d_t,
            v_t: window.v_t,
            detections: backend.detections_for(frame_index, &decision.selection),
        });
    }

    let full_model_baseline_ms = meta.frame_count as f64 * profile.full_latency_ms;
    let latency_saving_pct = if full_model_baseline_ms > 0.0 {
        (1.0 - total_latency_ms / full_model_baseline_ms) * 100.0
    } else {
        0.0
    };
    let per_window_timeline = windows
        .iter()
        .zip(&timeline.per_window)
        .map(|(w, d)| WindowTimelineEntry {
            window: w.window_index,
            t_start: w.t_start,
            d_m: w.d_t,
            v_mps: w.v_t,
            heads: d.selection,
        })
        .collect();

    Ok(SimulationRun {
        report: SimulationReport {
            frame_count: meta.frame_count,
            frames_low,
            frames_full,
            total_latency_ms,
            full_model_baseline_ms,
            latency_saving_pct,
            per_window_timeline,
        },
        decisions,
    })
}

/// Replays a frame stream against a vessel pair: builds motion windows, maps
/// frames onto them, selects heads, assigns per-frame latency from `profile`,
/// and invokes `backend` per frame.
pub fn run(
    traj_a: &Trajectory,
    traj_b: &Trajectory,
    meta: &FrameStreamMeta,
    cfg: &PolicyConfig,
    profile: &DetectorProfile,
    backend: &dyn DetectorBackend,
) -> Result<SimulationRun, SimError> {
    run_refs(&[traj_a, traj_b], meta, cfg, profile, backend)
}

/// [`run`] generalized to two or more vessels; beyond two, each window uses
/// the minimum pairwise distance and the minimizing pair's closure rate.
pub fn run_multi(
    trajectories: &[Trajectory],
    meta: &FrameStreamMeta,
    cfg: &PolicyConfig,
    profile: &DetectorProfile,
    backend: &dyn DetectorBackend,
) -> Result<SimulationRun, SimError> {
    let refs: Vec<&Trajectory> = trajectories.iter().collect();
    run_refs(&refs, meta, cfg, profile, backend)
}

/// Writes per-window rows as CSV: `window,t_start,d_m,v_mps,heads`.
/// Head sets render as `P3` or `P3|P4|P5`.
pub fn export_window_timeline(entries: &[WindowTimelineEntry], mut sink: impl Write) -> Result<(), SimError> {
    sink.write_all(b"window,t_start,d_m,v_mps,heads\n")?;
    for entry in entries {
        writeln!(
            sink,
            "{},{},{},{},{}",
            entry.window, entry.t_start, entry.d_m, entry.v_mps, entry.heads
        )?;
    }
    Ok(())
}

/// Writes a report's per-window timeline as CSV.
pub fn export_timeline(report: &SimulationReport, sink: impl Write) -> Result<(), SimError> {
    export_window_timeline(&report.per_window_timeline, sink)
}

/// Writes the report as pretty JSON with a fixed key order.
pub fn write_report_json(report: &SimulationReport, mut sink: impl Write) -> Result<(), SimError> {
    serde_json::to_writer_pretty(&mut sink, report).map_err(|e| SimError::Io(std::io::Error::other(e)))?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// Writes the decision log as JSONL, one frame per line.
pub fn write_decisions_jsonl(decisions: &[FrameDecision], mut sink: impl Write) -> Result<(), SimError> {
    for decision in decisions {
        serde_json::to_writer(&mut sink, decision).map_err(|e| SimError::Io(std::io::Error::other(e)))?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_motion::GeoFix;
    use crate::policy::Head;

    /// Meters per degree of latitude on the reference sphere.
    const M_PER_DEG: f64 = geo_motion::EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

    fn stationary(id: &str, seconds: usize, north_offset_m: f64) -> Trajectory {
        let fixes = (0..seconds)
            .map(|k| GeoFix::new(id, k as f64, 37.0 + north_offset_m / M_PER_DEG, 24.0).unwrap())
            .collect();
        Trajectory::new(id, fixes).unwrap()
    }

    fn head_entry(head: Head, latency_ms: Option<f64>, speedup: f64) -> crate::cost_model::HeadProfile {
        crate::cost_model::HeadProfile {
            head,
            latency_ms,
            speedup_vs_full: speedup,
            flops_savings_pct: 10.0,
            detections: 0,
            map50: 0.5,
            precision: 0.5,
            recall: 0.5,
        }
    }

    /// A profile whose latencies are exactly representable in binary, so
    /// repeated per-frame summation stays exact.
    fn exact_profile() -> DetectorProfile {
        DetectorProfile {
            model_name: "exact".into(),
            full_latency_ms: 10.5,
            total_detections: 0,
            heads: vec![
                head_entry(Head::P3, Some(6.5), 1.6),
                head_entry(Head::P4, None, 1.4),
                head_entry(Head::P5, None, 1.3),
            ],
        }
    }

    #[test]
    fn all_easy_run_costs_only_the_low_set() {
        let a = stationary("a", 20, 0.0);
        let b = stationary("b", 20, 60.0);
        let meta = FrameStreamMeta::new(100, 5.0, 0.0).unwrap();
        let profile = exact_profile();
        let run = run(&a, &b, &meta, &PolicyConfig::default(), &profile, &CostOnlyBackend).unwrap();
        assert_eq!(run.report.frames_full, 0);
        assert_eq!(run.report.frames_low, 100);
        assert_eq!(run.report.total_latency_ms, 100.0 * 6.5);
    }

    #[test]
    fn all_hard_run_matches_the_baseline_exactly() {
        let a = stationary("a", 20, 0.0);
        let b = stationary("b", 20, 10.0); // inside tau1 throughout
        let meta = FrameStreamMeta::new(100, 5.0, 0.0).unwrap();
        let profile = exact_profile();
        let run = run(&a, &b, &meta, &PolicyConfig::default(), &profile, &CostOnlyBackend).unwrap();
        assert_eq!(run.report.frames_low, 0);
        assert_eq!(run.report.total_latency_ms, run.report.full_model_baseline_ms);
        assert_eq!(run.report.latency_saving_pct, 0.0);
    }

    #[test]
    fn conservation_of_frames() {
        let a = stationary("a", 20, 0.0);
        let b = stationary("b", 20, 60.0);
        let meta = FrameStreamMeta::new(173, 9.3, 0.0).unwrap();
        let run = run(&a, &b, &meta, &PolicyConfig::default(), &exact_profile(), &CostOnlyBackend).unwrap();
        assert_eq!(run.report.frames_low + run.report.frames_full, 173);
        assert_eq!(run.decisions.len(), 173);
    }

    #[test]
    fn coverage_gap_is_an_error() {
        let a = stationary("a", 20, 0.0);
        let b = stationary("b", 20, 60.0);
        // 30 s of video against 20 s of trajectory overlap.
        let meta = FrameStreamMeta::new(300, 10.0, 0.0).unwrap();
        let err = run(&a, &b, &meta, &PolicyConfig::default(), &exact_profile(), &CostOnlyBackend);
        match err {
            Err(SimError::Coverage { tail_gap_s, .. }) => assert!(tail_gap_s > 9.0),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn aggregate_reduces_to_pairwise_for_two_vessels() {
        let a = stationary("a", 10, 0.0);
        let b = stationary("b", 10, 45.0);
        let pairwise = geo_motion::build_motion_windows(&a, &b).unwrap();
        let trajs = vec![a, b];
        let refs: Vec<&Trajectory> = trajs.iter().collect();
        let aggregate = build_aggregate_windows(&sorted_refs(&refs).unwrap()).unwrap();
        assert_eq!(aggregate, pairwise);
    }

    #[test]
    fn aggregate_picks_the_closest_pair() {
        let a = stationary("a", 10, 0.0);
        let b = stationary("b", 10, 40.0);
        let c = stationary("c", 10, 100.0);
        let agg = aggregate_pairs(&[a, b, c], 3.0).unwrap();
        assert_eq!(agg.pair, ("a".to_string(), "b".to_string()));
        assert!((agg.d_m - 40.0).abs() < 0.01);
        // Brute force over all three pairs.
        assert!(agg.d_m <= 60.0 && agg.d_m <= 100.0);
    }

    #[test]
    fn aggregate_tie_breaks_lexicographically() {
        // b and c sit symmetrically around a at exactly representable
        // latitude offsets, so both pair distances are bit-identical.
        let a = stationary("a", 10, 0.0);
        let b = stationary("b", 10, 0.25 * M_PER_DEG);
        let c = stationary("c", 10, -0.25 * M_PER_DEG);
        let agg = aggregate_pairs(&[c.clone(), b.clone(), a.clone()], 2.0).unwrap();
        assert_eq!(agg.pair, ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn aggregate_requires_two_vessels() {
        let a = stationary("a", 10, 0.0);
        assert!(matches!(
            aggregate_pairs(&[a], 0.0),
            Err(SimError::TooFewVessels(1))
        ));
    }

    #[test]
    fn replay_backend_filters_by_selection() {
        let mk = |head: Head| DetectionRecord {
            frame_index: 7,
            head,
            class_label: "ASV".into(),
            confidence: 0.9,
            x: 0.0,
            y: 0.0,
            w: 10.0,
            h: 10.0,
        };
        let backend = ReplayBackend::new(vec![mk(Head::P3), mk(Head::P4), mk(Head::P5)]);
        let only_p3 = backend.detections_for(7, &HeadSelection::only(Head::P3));
        assert_eq!(only_p3.len(), 1);
        assert!(only_p3.iter().all(|d| d.head == Head::P3));
        assert_eq!(backend.detections_for(7, &HeadSelection::full()).len(), 3);
        assert!(backend.detections_for(8, &HeadSelection::full()).is_empty());
    }

    #[test]
    fn timeline_export_shape() {
        let a = stationary("a", 3, 0.0);
        let b = stationary("b", 3, 60.0);
        let meta = FrameStreamMeta::new(9, 3.0, 0.0).unwrap();
        let run = run(&a, &b, &meta, &PolicyConfig::default(), &exact_profile(), &CostOnlyBackend).unwrap();
        let mut buf = Vec::new();
        export_timeline(&run.report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "window,t_start,d_m,v_mps,heads");
        assert_eq!(lines.len(), 1 + 3);
        assert!(lines[1].ends_with(",P3"));
    }

    #[test]
    fn empty_report_exports_header_only() {
        let report = SimulationReport {
            frame_count: 0,
            frames_low: 0,
            frames_full: 0,
            total_latency_ms: 0.0,
            full_model_baseline_ms: 0.0,
            latency_saving_pct: 0.0,
            per_window_timeline: vec![],
        };
        let mut buf = Vec::new();
        export_timeline(&report, &mut buf).unwrap();
        assert_eq!(buf, b"window,t_start,d_m,v_mps,heads\n");
    }

    #[test]
    fn runs_are_byte_deterministic() {
        let a = stationary("a", 15, 0.0);
        let b = stationary("b", 15, 45.0);
        let meta = FrameStreamMeta::new(120, 8.0, 0.0).unwrap();
        let render = || {
            let run = run(&a, &b, &meta, &PolicyConfig::default(), &exact_profile(), &CostOnlyBackend).unwrap();
            let mut report = Vec::new();
            write_report_json(&run.report, &mut report).unwrap();
            let mut timeline = Vec::new();
            export_timeline(&run.report, &mut timeline).unwrap();
            let mut decisions = Vec::new();
            write_decisions_jsonl(&run.decisions, &mut decisions).unwrap();
            (report, timeline, decisions)
        };
        assert_eq!(render(), render());
    }
}
