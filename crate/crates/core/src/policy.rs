//! Trajectory-aware exiting criterion: maps per-second motion windows to the
//! subset of detector heads to activate.
//!
//! A window is *easy* when the tracked pair is far apart and not converging
//! fast; easy windows run the configured low set (by default just `P3`),
//! everything else runs the full head set. Boundary equality on either
//! threshold, gap-invalidated windows, and non-finite motion values all fall
//! to the conservative full-model branch.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geo_motion::MotionWindow;
use crate::ingest::FrameWindowMap;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("head selection must not be empty")]
    EmptySelection,
    #[error("unknown head `{0}` (expected P3, P4, or P5)")]
    UnknownHead(String),
    #[error("invalid policy config: {0}")]
    InvalidConfig(String),
    #[error("frame {frame} maps to window {window}, but only {window_count} windows exist")]
    WindowIndexOutOfRange {
        frame: usize,
        window: usize,
        window_count: usize,
    },
}

/// One detection head of a three-scale detector. `P3` works on the highest
/// resolution feature map (small objects), `P5` on the lowest (large objects).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Head {
    P3,
    P4,
    P5,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::P3, Head::P4, Head::P5];

    fn bit(self) -> u8 {
        match self {
            Head::P3 => 0b001,
            Head::P4 => 0b010,
            Head::P5 => 0b100,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Head::P3 => "P3",
            Head::P4 => "P4",
            Head::P5 => "P5",
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Head {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "P3" => Ok(Head::P3),
            "P4" => Ok(Head::P4),
            "P5" => Ok(Head::P5),
            other => Err(PolicyError::UnknownHead(other.to_string())),
        }
    }
}

/// A non-empty subset of detection heads, e.g. `{P3}` or `{P3, P4, P5}`.
///
/// Serializes as a sorted list of head names; displays as `P3|P4|P5`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeadSelection(u8);

impl HeadSelection {
    pub fn new(heads: &[Head]) -> Result<Self, PolicyError> {
        if heads.is_empty() {
            return Err(PolicyError::EmptySelection);
        }
        Ok(Self(heads.iter().fold(0, |acc, h| acc | h.bit())))
    }

    /// The selection containing only `head`.
    pub fn only(head: Head) -> Self {
        Self(head.bit())
    }

    /// All three heads.
    pub fn full() -> Self {
        Self(0b111)
    }

    pub fn contains(&self, head: Head) -> bool {
        self.0 & head.bit() != 0
    }

    pub fn is_full(&self) -> bool {
        self.0 == 0b111
    }

    pub fn is_subset_of(&self, other: &HeadSelection) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Member heads in fixed `P3 < P4 < P5` order.
    pub fn heads(&self) -> impl Iterator<Item = Head> + '_ {
        Head::ALL.into_iter().filter(|h| self.contains(*h))
    }
}

impl fmt::Display for HeadSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for head in self.heads() {
            if !first {
                f.write_str("|")?;
            }
            f.write_str(head.as_str())?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for HeadSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

impl Serialize for HeadSelection {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.heads())
    }
}

impl<'de> Deserialize<'de> for HeadSelection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let heads = Vec::<Head>::deserialize(deserializer)?;
        HeadSelection::new(&heads).map_err(D::Error::custom)
    }
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

/// Thresholds and head sets of the exiting criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Distance threshold in meters; a window can only be easy when the pair
    /// distance strictly exceeds it.
    pub tau1_m: f64,
    /// Closure-rate threshold in m/s; a window can only be easy when the
    /// closure rate stays strictly below it.
    pub tau2_mps: f64,
    /// Heads activated for easy windows.
    pub low_set: HeadSelection,
    /// Heads activated otherwise.
    pub full_set: HeadSelection,
    /// Compare |v_t| instead of the signed closure rate.
    #[serde(default)]
    pub use_abs_v: bool,
    /// Oscillation damping: after a full-model window, require this many
    /// consecutive easy evaluations before switching back to the low set.
    /// 0 or 1 disables damping. Escalation to the full set is never delayed.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub min_dwell_windows: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            tau1_m: 30.0,
            tau2_mps: 0.5,
            low_set: HeadSelection::only(Head::P3),
            full_set: HeadSelection::full(),
            use_abs_v: false,
            min_dwell_windows: 0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.tau1_m.is_finite() && self.tau1_m > 0.0) {
            return Err(PolicyError::InvalidConfig(format!(
                "tau1_m must be positive and finite, got {}",
                self.tau1_m
            )));
        }
        if !self.tau2_mps.is_finite() {
            return Err(PolicyError::InvalidConfig(format!(
                "tau2_mps must be finite, got {}",
                self.tau2_mps
            )));
        }
        if !self.low_set.is_subset_of(&self.full_set) {
            return Err(PolicyError::InvalidConfig(format!(
                "low_set {{{}}} must be a subset of full_set {{{}}}",
                self.low_set, self.full_set
            )));
        }
        Ok(())
    }
}

/// Outcome of evaluating the criterion for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowDecision {
    pub window_index: usize,
    pub selection: HeadSelection,
    /// True when the easy branch was taken.
    pub easy: bool,
}

/// Evaluates the criterion for one window.
///
/// Easy iff the window is valid, `d_t > tau1`, and the (optionally absolute)
/// closure rate is `< tau2`. Equality on either threshold is not easy.
pub fn decide(window: &MotionWindow, cfg: &PolicyConfig) -> WindowDecision {
    let v = if cfg.use_abs_v { window.v_t.abs() } else { window.v_t };
    let easy = window.valid
        && window.d_t.is_finite()
        && v.is_finite()
        && window.d_t > cfg.tau1_m
        && v < cfg.tau2_mps;
    WindowDecision {
        window_index: window.window_index,
        selection: if easy { cfg.low_set } else { cfg.full_set },
        easy,
    }
}

/// The head subset to activate for one window.
pub fn select_heads(window: &MotionWindow, cfg: &PolicyConfig) -> HeadSelection {
    decide(window, cfg).selection
}

/// Per-window and per-frame head selections for a whole run.
#[derive(Debug, Clone)]
pub struct SelectionTimeline {
    pub per_window: Vec<WindowDecision>,
    /// One selection per frame, in frame order.
    pub per_frame: Vec<HeadSelection>,
}

/// Evaluates the criterion over a window sequence, applying dwell damping.
/// With `min_dwell_windows >= 2`, switches back to the low set are delayed
/// until the easy condition has held that many consecutive windows;
/// escalation to the full set is never delayed.
pub fn window_decisions(
    windows: &[MotionWindow],
    cfg: &PolicyConfig,
) -> Result<Vec<WindowDecision>, PolicyError> {
    cfg.validate()?;
    let mut per_window = Vec::with_capacity(windows.len());
    let mut easy_streak = 0u32;
    let mut prev_easy: Option<bool> = None;
    for window in windows {
        let raw = decide(window, cfg);
        easy_streak = if raw.easy { easy_streak + 1 } else { 0 };
        let easy = raw.easy
            && (cfg.min_dwell_windows <= 1
                || prev_easy != Some(false)
                || easy_streak >= cfg.min_dwell_windows);
        per_window.push(WindowDecision {
            window_index: window.window_index,
            selection: if easy { cfg.low_set } else { cfg.full_set },
            easy,
        });
        prev_easy = Some(easy);
    }
    Ok(per_window)
}

/// Evaluates the criterion over every window and expands the decisions to
/// frames through `map`.
pub fn selection_timeline(
    windows: &[MotionWindow],
    map: &FrameWindowMap,
    cfg: &PolicyConfig,
) -> Result<SelectionTimeline, PolicyError> {
    let per_window = window_decisions(windows, cfg)?;
    let mut per_frame = Vec::with_capacity(map.len());
    for (frame, window) in map.iter() {
        let decision = per_window
            .get(window)
            .ok_or(PolicyError::WindowIndexOutOfRange {
                frame,
                window,
                window_count: per_window.len(),
            })?;
        per_frame.push(decision.selection);
    }
    Ok(SelectionTimeline { per_window, per_frame })
}
