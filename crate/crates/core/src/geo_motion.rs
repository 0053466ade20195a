//! Geodesy and relative-motion kinematics for vessel trajectory pairs.
//!
//! Positions are latitude/longitude samples treated on a sphere of radius
//! [`EARTH_RADIUS_M`]. Motion is summarized at one-second granularity: each
//! [`MotionWindow`] carries the inter-vessel distance `d_t` sampled at the
//! window start and the closure rate `v_t` relative to the previous window.
//!
//! All types are immutable values and all functions are pure, so everything
//! here is safe to call concurrently.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters, used for all great-circle math.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A fix within this many seconds of a query time is used directly instead
/// of interpolating between neighbors.
pub const NEAREST_FIX_TOLERANCE_S: f64 = 0.5;

/// A sampling gap longer than this (seconds) marks every window whose data
/// was interpolated across it as invalid; invalid windows are handled
/// conservatively by the head-selection policy.
pub const MAX_GAP_S: f64 = 2.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid coordinate lat {lat}, lon {lon}: lat must be in [-90, 90] and lon in [-180, 180], both finite")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("timestamp must be finite, got {0}")]
    NonFiniteTimestamp(f64),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
    #[error("distance must be non-negative and finite, got {0}")]
    InvalidDistance(f64),
    #[error("trajectory `{vessel_id}` has no fixes")]
    EmptyTrajectory { vessel_id: String },
    #[error("trajectory `{vessel_id}`: timestamps must be strictly increasing, got {prev} followed by {next}")]
    NonMonotonicFixes { vessel_id: String, prev: f64, next: f64 },
    #[error("trajectory `{expected}` contains a fix for vessel `{found}`")]
    MixedVesselIds { expected: String, found: String },
    #[error("time {t} is outside trajectory `{vessel_id}` coverage [{first}, {last}]")]
    OutOfCoverage {
        vessel_id: String,
        t: f64,
        first: f64,
        last: f64,
    },
    #[error("trajectories do not overlap in time")]
    NoOverlap,
    #[error("trajectories overlap for only {secs:.3} s; at least 1 s is required")]
    DegenerateOverlap { secs: f64 },
    #[error("motion window {index}: {reason}")]
    InvalidWindow { index: usize, reason: String },
}

fn check_coords(lat: f64, lon: f64) -> Result<(), GeoError> {
    if !(lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)) {
        return Err(GeoError::InvalidCoordinate { lat, lon });
    }
    Ok(())
}

/// A timestamped GPS sample for one vessel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoFix {
    pub vessel_id: String,
    /// Seconds since epoch; may be fractional.
    pub t: f64,
    /// Degrees in [-90, 90].
    pub lat: f64,
    /// Degrees in [-180, 180].
    pub lon: f64,
}

impl GeoFix {
    pub fn new(vessel_id: impl Into<String>, t: f64, lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !t.is_finite() {
            return Err(GeoError::NonFiniteTimestamp(t));
        }
        check_coords(lat, lon)?;
        Ok(Self {
            vessel_id: vessel_id.into(),
            t,
            lat,
            lon,
        })
    }
}

/// A vessel position resolved for an arbitrary query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSample {
    pub lat: f64,
    pub lon: f64,
    /// True when the position was interpolated across a sampling gap longer
    /// than [`MAX_GAP_S`].
    pub over_gap: bool,
}

/// The ordered fix sequence of one vessel.
///
/// Construction enforces a non-empty sequence with strictly increasing
/// timestamps and a single vessel id throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    vessel_id: String,
    fixes: Vec<GeoFix>,
}

impl Trajectory {
    pub fn new(vessel_id: impl Into<String>, fixes: Vec<GeoFix>) -> Result<Self, GeoError> {
        let vessel_id = vessel_id.into();
        if fixes.is_empty() {
            return Err(GeoError::EmptyTrajectory { vessel_id });
        }
        for pair in fixes.windows(2) {
            if pair[1].t <= pair[0].t {
                return Err(GeoError::NonMonotonicFixes {
                    vessel_id,
                    prev: pair[0].t,
                    next: pair[1].t,
                });
            }
        }
        if let Some(odd) = fixes.iter().find(|f| f.vessel_id != vessel_id) {
            return Err(GeoError::MixedVesselIds {
                expected: vessel_id,
                found: odd.vessel_id.clone(),
            });
        }
        Ok(Self { vessel_id, fixes })
    }

    pub fn vessel_id(&self) -> &str {
        &self.vessel_id
    }

    pub fn fixes(&self) -> &[GeoFix] {
        &self.fixes
    }

    pub fn first_t(&self) -> f64 {
        self.fixes[0].t
    }

    pub fn last_t(&self) -> f64 {
        self.fixes[self.fixes.len() - 1].t
    }

    /// Resolves the vessel position at `t`: the nearest fix when one lies
    /// within [`NEAREST_FIX_TOLERANCE_S`], otherwise linear interpolation in
    /// lat/lon between the bracketing fixes. Linear interpolation is adequate
    /// at the meter scales and sub-second gaps involved here.
    pub fn position_at(&self, t: f64) -> Result<PositionSample, GeoError> {
        if !t.is_finite() {
            return Err(GeoError::NonFiniteTimestamp(t));
        }
        // Index of the first fix with fix.t >= t.
        let idx = self.fixes.partition_point(|f| f.t < t);
        let before = idx.checked_sub(1).map(|i| &self.fixes[i]);
        let after = self.fixes.get(idx);
        let nearest = match (before, after) {
            (Some(a), Some(b)) => {
                // Tie favors the earlier fix.
                if (t - a.t) <= (b.t - t) {
                    Some(a)
                } else {
                    Some(b)
                }
            }
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        };
        if let Some(fix) = nearest {
            if (t - fix.t).abs() <= NEAREST_FIX_TOLERANCE_S {
                return Ok(PositionSample {
                    lat: fix.lat,
                    lon: fix.lon,
                    over_gap: false,
                });
            }
        }
        match (before, after) {
            (Some(a), Some(b)) => {
                let span = b.t - a.t;
                let w = (t - a.t) / span;
                Ok(PositionSample {
                    lat: a.lat + (b.lat - a.lat) * w,
                    lon: a.lon + (b.lon - a.lon) * w,
                    over_gap: span > MAX_GAP_S,
                })
            }
            _ => Err(GeoError::OutOfCoverage {
                vessel_id: self.vessel_id.clone(),
                t,
                first: self.first_t(),
                last: self.last_t(),
            }),
        }
    }
}

/// A one-second aggregate of the relative motion of a vessel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionWindow {
    pub window_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Inter-vessel distance in meters, sampled at `t_start`.
    pub d_t: f64,
    /// Closure rate in m/s; positive while the pair converges.
    pub v_t: f64,
    /// False for the first window, which has no previous distance; `v_t` is
    /// defined as 0 there.
    pub valid_v: bool,
    /// False when the window's samples were interpolated across a gap longer
    /// than [`MAX_GAP_S`].
    pub valid: bool,
}

impl MotionWindow {
    pub fn new(
        window_index: usize,
        t_start: f64,
        d_t: f64,
        v_t: f64,
        valid_v: bool,
        valid: bool,
    ) -> Result<Self, GeoError> {
        if !t_start.is_finite() {
            return Err(GeoError::InvalidWindow {
                index: window_index,
                reason: format!("t_start must be finite, got {t_start}"),
            });
        }
        if !(d_t.is_finite() && d_t >= 0.0) {
            return Err(GeoError::InvalidWindow {
                index: window_index,
                reason: format!("d_t must be non-negative and finite, got {d_t}"),
            });
        }
        if !v_t.is_finite() {
            return Err(GeoError::InvalidWindow {
                index: window_index,
                reason: format!("v_t must be finite, got {v_t}"),
            });
        }
        Ok(Self {
            window_index,
            t_start,
            t_end: t_start + 1.0,
            d_t,
            v_t,
            valid_v,
            valid,
        })
    }
}

/// Great-circle distance in meters between two lat/lon points (haversine).
///
/// Exactly symmetric in its arguments and exactly zero for identical points.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64, GeoError> {
    check_coords(lat1, lon1)?;
    check_coords(lat2, lon2)?;
    // Absolute deltas keep the evaluation bitwise symmetric in the argument
    // order; sin^2 makes the sign irrelevant mathematically.
    let d_phi = (lat2 - lat1).abs().to_radians();
    let d_lambda = (lon2 - lon1).abs().to_radians();
    let sin_half_phi = (d_phi * 0.5).sin();
    let sin_half_lambda = (d_lambda * 0.5).sin();
    let h = sin_half_phi * sin_half_phi
        + lat1.to_radians().cos() * lat2.to_radians().cos() * sin_half_lambda * sin_half_lambda;
    let h = h.clamp(0.0, 1.0);
    Ok(2.0 * EARTH_RADIUS_M * h.sqrt().atan2((1.0 - h).sqrt()))
}

/// Rate at which a separation shrinks, in m/s: `(d_prev - d_curr) / dt`.
///
/// Positive while the objects converge, negative while they diverge.
pub fn closure_rate(d_prev: f64, d_curr: f64, dt: f64) -> Result<f64, GeoError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(GeoError::InvalidTimeStep(dt));
    }
    for d in [d_prev, d_curr] {
        if !(d.is_finite() && d >= 0.0) {
            return Err(GeoError::InvalidDistance(d));
        }
    }
    Ok((d_prev - d_curr) / dt)
}

/// Distance in meters between two vessels at time `t`, resolving each
/// position per [`Trajectory::position_at`].
pub fn pairwise_distance_at(traj_a: &Trajectory, traj_b: &Trajectory, t: f64) -> Result<f64, GeoError> {
    let a = traj_a.position_at(t)?;
    let b = traj_b.position_at(t)?;
    haversine_m(a.lat, a.lon, b.lat, b.lon)
}

/// The shared time range of two trajectories, in whole seconds.
///
/// A fix at time `t` describes the one-second window beginning at `t`, so a
/// trajectory's coverage extends one second past its final fix. Two 1 Hz logs
/// with fixes at 0..=124 therefore overlap for 125 whole seconds.
fn overlap_range(traj_a: &Trajectory, traj_b: &Trajectory) -> Result<(f64, usize), GeoError> {
    let t_lo = traj_a.first_t().max(traj_b.first_t());
    let t_hi = traj_a.last_t().min(traj_b.last_t());
    let overlap_s = t_hi + 1.0 - t_lo;
    if overlap_s <= 0.0 {
        return Err(GeoError::NoOverlap);
    }
    if overlap_s < 1.0 {
        return Err(GeoError::DegenerateOverlap { secs: overlap_s });
    }
    Ok((t_lo, overlap_s.floor() as usize))
}

/// Builds one [`MotionWindow`] per whole second of temporal overlap.
///
/// Window `k` samples the pair distance at its start; `v_t` is the closure
/// rate against window `k - 1` (zero, with `valid_v = false`, for `k = 0`).
/// A window is marked invalid when its own distance sample, or the previous
/// one feeding its closure rate, was interpolated across a gap longer than
/// [`MAX_GAP_S`].
pub fn build_motion_windows(traj_a: &Trajectory, traj_b: &Trajectory) -> Result<Vec<MotionWindow>, GeoError> {
    let (t_lo, count) = overlap_range(traj_a, traj_b)?;
    let mut windows = Vec::with_capacity(count);
    let mut prev: Option<(f64, bool)> = None;
    for k in 0..count {
        let t = t_lo + k as f64;
        let a = traj_a.position_at(t)?;
        let b = traj_b.position_at(t)?;
        let d = haversine_m(a.lat, a.lon, b.lat, b.lon)?;
        let sample_clean = !a.over_gap && !b.over_gap;
        let (v, valid_v) = match prev {
            Some((d_prev, _)) => (closure_rate(d_prev, d, 1.0)?, true),
            None => (0.0, false),
        };
        let valid = sample_clean && prev.map_or(true, |(_, prev_clean)| prev_clean);
        windows.push(MotionWindow::new(k, t, d, v, valid_v, valid)?);
        prev = Some((d, sample_clean));
    }
    Ok(windows)
}
