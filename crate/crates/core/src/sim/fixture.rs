//! Deterministic synthetic fixtures: a two-vessel scenario whose per-second
//! motion produces a chosen easy/hard window layout under the default policy
//! thresholds (30 m / 0.5 m/s).
//!
//! The construction is fully synthetic. One vessel holds position; the other
//! sits on the same meridian at an engineered per-second distance: easy
//! windows keep it 55-65 m out, drifting slower than the closure-rate
//! threshold, while hard windows pull it inside 18-24 m, which trips the
//! distance threshold regardless of speed. A seeded RNG jitters geometry and
//! detections; the easy/hard layout itself is seed-independent.
//!
//! [`HardLayout::ExactFullFrames`] engineers the window set so that a given
//! number of frames lands on full-model windows. Because every one-second
//! window holds either `floor(fps)` or `ceil(fps)` frames, hitting an exact
//! frame total generally forces short, scattered hard windows rather than
//! long contiguous episodes; the picker spreads them across the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geo_motion::{self, GeoFix, MotionWindow, Trajectory, EARTH_RADIUS_M};
use crate::ingest::{self, DetectionRecord, FrameStreamMeta};
use crate::policy::{self, Head, PolicyConfig};

const M_PER_DEG_LAT: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// Distance band for easy windows (meters).
const EASY_BASE_M: f64 = 60.0;
const EASY_AMPLITUDE_M: f64 = 5.0;
/// Oscillation period of the easy-band drift, in seconds; slow enough that
/// the implied closure rate stays well below the 0.5 m/s threshold.
const EASY_PERIOD_S: f64 = 120.0;
/// Distance band for hard windows (meters), safely inside the 30 m threshold.
const HARD_MIN_M: f64 = 18.0;
const HARD_SPAN_M: f64 = 6.0;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture spec: {0}")]
    InvalidSpec(String),
    #[error("no window subset yields exactly {target} full-model frames out of {frame_count}")]
    UnreachableFrameSplit { target: u64, frame_count: u64 },
    #[error("fixture generation produced an inconsistent scenario: {0}")]
    Internal(String),
}

/// Which windows take the full-model branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HardLayout {
    AllEasy,
    AllHard,
    /// Explicit hard window indices.
    Windows(Vec<usize>),
    /// Choose hard windows so exactly this many frames run the full model.
    ExactFullFrames(u64),
}

/// Parameters of a synthetic scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    /// Whole seconds of recording; one fix per second per vessel, and one
    /// motion window per second.
    pub duration_s: u32,
    pub fps: f64,
    pub t0: f64,
    pub layout: HardLayout,
    pub seed: u64,
}

impl FixtureSpec {
    /// The bundled preset: a 125 s recording at 3686/125 fps whose window
    /// layout sends exactly 659 of the 3686 frames through the full model.
    pub fn paper(seed: u64) -> Self {
        Self {
            duration_s: 125,
            fps: 3686.0 / 125.0,
            t0: 0.0,
            layout: HardLayout::ExactFullFrames(659),
            seed,
        }
    }
}

/// A generated scenario plus the split it guarantees under the default
/// policy config.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub trajectories: Vec<Trajectory>,
    pub meta: FrameStreamMeta,
    pub detections: Vec<DetectionRecord>,
    /// Hard window indices, sorted.
    pub hard_windows: Vec<usize>,
    pub expected_frames_low: u64,
    pub expected_frames_full: u64,
}

/// Picks `want` entries from `candidates`, spread evenly across the list.
fn pick_spread(candidates: &[usize], want: usize) -> Vec<usize> {
    (0..want).map(|i| candidates[i * candidates.len() / want]).collect()
}

/// Chooses hard windows whose frame counts sum exactly to `target`. Window
/// counts take at most two distinct values for a uniform frame rate, so this
/// reduces to solving `hi * x + lo * y = target` and spreading the picks.
fn solve_exact_split(counts: &[u64], target: u64, frame_count: u64) -> Result<Vec<usize>, FixtureError> {
    if target == 0 {
        return Ok(Vec::new());
    }
    if target == frame_count {
        return Ok((0..counts.len()).collect());
    }
    if target > frame_count {
        return Err(FixtureError::UnreachableFrameSplit { target, frame_count });
    }
    let mut values: Vec<u64> = counts.to_vec();
    values.sort_unstable();
    values.dedup();
    if values.len() > 2 {
        return Err(FixtureError::UnreachableFrameSplit { target, frame_count });
    }
    let (lo, hi) = (values[0], *values.last().unwrap());
    let lo_windows: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] == lo).collect();
    let hi_windows: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] == hi).collect();
    let max_hi = if hi == 0 { 0 } else { (target / hi).min(hi_windows.len() as u64) };
    for x in (0..=max_hi).rev() {
        let rem = target - hi * x;
        let y = if rem == 0 {
            Some(0u64)
        } else if lo > 0 && rem % lo == 0 && rem / lo <= lo_windows.len() as u64 {
            Some(rem / lo)
        } else {
            None
        };
        if let Some(y) = y {
            let mut hard = pick_spread(&hi_windows, x as usize);
            hard.extend(pick_spread(&lo_windows, y as usize));
            hard.sort_unstable();
            return Ok(hard);
        }
    }
    Err(FixtureError::UnreachableFrameSplit { target, frame_count })
}

/// Per-second distances implementing the layout: a slow sine inside the easy
/// band, seeded jitter inside the hard band.
fn distance_profile(hard: &[bool], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut distances = Vec::with_capacity(hard.len());
    let mut run_start = 0usize;
    let mut run_phase = 0.0f64;
    for (k, &is_hard) in hard.iter().enumerate() {
        if is_hard {
            distances.push(HARD_MIN_M + rng.random_range(0.0..HARD_SPAN_M));
        } else {
            if k == 0 || hard[k - 1] {
                run_start = k;
                run_phase = rng.random_range(0.0..std::f64::consts::TAU);
            }
            let angle = std::f64::consts::TAU * (k - run_start) as f64 / EASY_PERIOD_S + run_phase;
            distances.push(EASY_BASE_M + EASY_AMPLITUDE_M * angle.sin());
        }
    }
    distances
}

fn synth_detections(frame_count: u64, rng: &mut ChaCha8Rng) -> Vec<DetectionRecord> {
    let mut detections = Vec::new();
    for frame in 0..frame_count {
        let mut push = |head: Head, class_label: &str, rng: &mut ChaCha8Rng| {
            detections.push(DetectionRecord {
                frame_index: frame,
                head,
                class_label: class_label.to_string(),
                confidence: rng.random_range(0.3..0.99),
                x: rng.random_range(0.0..1280.0),
                y: rng.random_range(0.0..720.0),
                w: rng.random_range(8.0..180.0),
                h: rng.random_range(8.0..180.0),
            });
        };
        push(Head::P3, "ASV", rng);
        push(Head::P4, "ASV", rng);
        if frame % 3 == 0 {
            push(Head::P5, "Boat", rng);
        }
    }
    detections
}

/// Generates a scenario. Deterministic for a given spec; the returned split
/// is verified against the default [`PolicyConfig`] before returning.
pub fn generate(spec: &FixtureSpec) -> Result<Fixture, FixtureError> {
    if spec.duration_s == 0 {
        return Err(FixtureError::InvalidSpec("duration must be at least 1 s".into()));
    }
    if !(spec.fps.is_finite() && spec.fps > 0.0) {
        return Err(FixtureError::InvalidSpec(format!(
            "fps must be positive and finite, got {}",
            spec.fps
        )));
    }
    if !spec.t0.is_finite() {
        return Err(FixtureError::InvalidSpec(format!("t0 must be finite, got {}", spec.t0)));
    }
    let window_count = spec.duration_s as usize;
    let frame_count = (spec.duration_s as f64 * spec.fps).round() as u64;
    if frame_count == 0 {
        return Err(FixtureError::InvalidSpec(
            "duration and fps produce zero frames".into(),
        ));
    }
    let meta = FrameStreamMeta::new(frame_count, spec.fps, spec.t0)
        .map_err(|e| FixtureError::InvalidSpec(e.to_string()))?;

    // Frame count per window, computed through the real mapping against
    // windows with the same start times the trajectories will produce.
    let probe: Vec<MotionWindow> = (0..window_count)
        .map(|k| MotionWindow::new(k, spec.t0 + k as f64, 0.0, 0.0, false, true))
        .collect::<Result<_, _>>()
        .map_err(|e| FixtureError::Internal(e.to_string()))?;
    let probe_map = ingest::map_frames_to_windows(&meta, &probe)
        .map_err(|e| FixtureError::Internal(e.to_string()))?;
    let counts = probe_map.frames_per_window(window_count);

    let hard_windows: Vec<usize> = match &spec.layout {
        HardLayout::AllEasy => Vec::new(),
        HardLayout::AllHard => (0..window_count).collect(),
        HardLayout::Windows(indices) => {
            let mut sorted = indices.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if let Some(&bad) = sorted.iter().find(|&&k| k >= window_count) {
                return Err(FixtureError::InvalidSpec(format!(
                    "hard window {bad} out of range (have {window_count} windows)"
                )));
            }
            sorted
        }
        HardLayout::ExactFullFrames(target) => solve_exact_split(&counts, *target, frame_count)?,
    };
    let mut hard = vec![false; window_count];
    for &k in &hard_windows {
        hard[k] = true;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base_lat = 37.40 + rng.random_range(0.0..0.05);
    let base_lon = 24.90 + rng.random_range(0.0..0.07);
    let distances = distance_profile(&hard, &mut rng);

    let make_traj = |id: &str, lats: Vec<f64>| -> Result<Trajectory, FixtureError> {
        let fixes: Result<Vec<GeoFix>, _> = lats
            .iter()
            .enumerate()
            .map(|(k, &lat)| GeoFix::new(id, spec.t0 + k as f64, lat, base_lon))
            .collect();
        Trajectory::new(id, fixes.map_err(|e| FixtureError::Internal(e.to_string()))?)
            .map_err(|e| FixtureError::Internal(e.to_string()))
    };
    let anchor = make_traj("asv-1", vec![base_lat; window_count])?;
    let partner = make_traj(
        "asv-2",
        distances.iter().map(|d| base_lat + d / M_PER_DEG_LAT).collect(),
    )?;

    let detections = synth_detections(frame_count, &mut rng);

    // Verify the scenario delivers the promised split under the default
    // thresholds before handing it out.
    let windows = geo_motion::build_motion_windows(&anchor, &partner)
        .map_err(|e| FixtureError::Internal(e.to_string()))?;
    if windows.len() != window_count {
        return Err(FixtureError::Internal(format!(
            "expected {window_count} windows, built {}",
            windows.len()
        )));
    }
    let cfg = PolicyConfig::default();
    let mut expected_frames_full = 0u64;
    for (k, window) in windows.iter().enumerate() {
        let decision = policy::decide(window, &cfg);
        if decision.easy == hard[k] {
            return Err(FixtureError::Internal(format!(
                "window {k} decided {} but was laid out as {} (d={}, v={})",
                if decision.easy { "easy" } else { "hard" },
                if hard[k] { "hard" } else { "easy" },
                window.d_t,
                window.v_t
            )));
        }
        if hard[k] {
            expected_frames_full += counts[k];
        }
    }
    if let HardLayout::ExactFullFrames(target) = spec.layout {
        if expected_frames_full != target {
            return Err(FixtureError::Internal(format!(
                "layout yields {expected_frames_full} full-model frames, wanted {target}"
            )));
        }
    }

    Ok(Fixture {
        trajectories: vec![anchor, partner],
        meta,
        detections,
        hard_windows,
        expected_frames_low: frame_count - expected_frames_full,
        expected_frames_full,
    })
}
