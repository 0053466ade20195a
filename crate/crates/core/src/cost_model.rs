//! Per-head cost/quality profiles of detector variants, and projection of
//! latency and FLOPs savings for arbitrary head subsets.
//!
//! Profiles carry measured data: per-head detection tallies, isolated-head
//! speedups, FLOPs savings, and standalone quality metrics. This module never
//! measures anything itself; it validates profiles and projects costs from
//! them. Only single heads and the full path are measured quantities; costs
//! for other subsets are modeled conservatively (max latency / min savings
//! over members) because the neck's shared subgraphs make per-head costs
//! non-additive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{Head, HeadSelection};

/// Allowed absolute gap between a declared speedup and the speedup implied by
/// the measured latencies, when a profile carries both.
pub const SPEEDUP_CONSISTENCY_TOL: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CostModelError {
    #[error("profile `{model}` has no entry for head {head}")]
    MissingHead { model: String, head: Head },
    #[error("profile `{model}`, head {head}: cannot derive a latency from speedup {speedup}")]
    UnusableSpeedup { model: String, head: Head, speedup: f64 },
    #[error("cannot parse detector profile: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Cost and quality statistics for one head run in isolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadProfile {
    pub head: Head,
    /// Median per-frame latency of the isolated head, when measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    /// Speedup of the isolated head relative to the full path.
    #[serde(rename = "speedup")]
    pub speedup_vs_full: f64,
    pub flops_savings_pct: f64,
    pub detections: u64,
    pub map50: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Cost and quality statistics for one detector variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorProfile {
    #[serde(rename = "model")]
    pub model_name: String,
    /// Median per-frame latency of the full path, in milliseconds. Bundled
    /// table profiles that were only measured relatively use 1.0 here, i.e.
    /// latencies in units of the full path.
    pub full_latency_ms: f64,
    pub total_detections: u64,
    pub heads: Vec<HeadProfile>,
}

impl DetectorProfile {
    pub fn from_json_str(json: &str) -> Result<Self, CostModelError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn head_profile(&self, head: Head) -> Result<&HeadProfile, CostModelError> {
        self.heads.iter().find(|h| h.head == head).ok_or_else(|| {
            CostModelError::MissingHead {
                model: self.model_name.clone(),
                head,
            }
        })
    }

    /// Isolated-head latency: the measured value when present, otherwise the
    /// full-path latency divided by the head's speedup.
    pub fn effective_head_latency(&self, head: Head) -> Result<f64, CostModelError> {
        let profile = self.head_profile(head)?;
        match profile.latency_ms {
            Some(ms) => Ok(ms),
            None => {
                let speedup = profile.speedup_vs_full;
                if !(speedup.is_finite() && speedup > 0.0) {
                    return Err(CostModelError::UnusableSpeedup {
                        model: self.model_name.clone(),
                        head,
                        speedup,
                    });
                }
                Ok(self.full_latency_ms / speedup)
            }
        }
    }
}

/// Projected per-frame latency for a head selection.
///
/// The full set costs exactly the full path; a singleton costs that head in
/// isolation; any other subset is modeled as the maximum over its members.
pub fn latency_for(selection: &HeadSelection, profile: &DetectorProfile) -> Result<f64, CostModelError> {
    if selection.is_full() {
        return Ok(profile.full_latency_ms);
    }
    let mut worst = f64::NEG_INFINITY;
    for head in selection.heads() {
        worst = worst.max(profile.effective_head_latency(head)?);
    }
    Ok(worst)
}

/// Projected FLOPs savings (percent of the full path) for a head selection:
/// zero for the full set, the head's own figure for a singleton, and the
/// minimum over members otherwise.
pub fn flops_savings_for(selection: &HeadSelection, profile: &DetectorProfile) -> Result<f64, CostModelError> {
    if selection.is_full() {
        return Ok(0.0);
    }
    let mut least = f64::INFINITY;
    for head in selection.heads() {
        least = least.min(profile.head_profile(head)?.flops_savings_pct);
    }
    Ok(least)
}

/// One inconsistency found in a profile.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileIssue {
    #[error("full_latency_ms must be positive and finite, got {0}")]
    BadFullLatency(f64),
    #[error("expected exactly one entry for head {head}, found {count}")]
    HeadMultiplicity { head: Head, count: usize },
    #[error("head {head}: latency_ms must be positive and finite, got {value}")]
    BadHeadLatency { head: Head, value: f64 },
    #[error("head {head}: speedup must be positive and finite, got {value}")]
    BadSpeedup { head: Head, value: f64 },
    #[error("head {head}: flops_savings_pct must be in [0, 100), got {value}")]
    BadFlopsSavings { head: Head, value: f64 },
    #[error("head {head}: {metric} must be in [0, 1], got {value}")]
    BadQualityMetric {
        head: Head,
        metric: &'static str,
        value: f64,
    },
    #[error("per-head detections sum to {sum}, but total_detections is {total}")]
    DetectionSumMismatch { sum: u64, total: u64 },
    #[error("head {head}: measured latencies imply speedup {implied:.4}, profile declares {declared} (gap above {SPEEDUP_CONSISTENCY_TOL})")]
    SpeedupLatencyMismatch {
        head: Head,
        implied: f64,
        declared: f64,
    },
}

/// Result of checking a profile against its invariants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ProfileIssue>,
}

impl ValidationReport {
    pub fn is_consistent(&self) -> bool {
        self.issues.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("profile is consistent");
        }
        for issue in &self.issues {
            writeln!(f, "- {issue}")?;
        }
        Ok(())
    }
}

/// Lists every invariant violation in `profile`; an empty report means the
/// profile is consistent.
pub fn validate_profile(profile: &DetectorProfile) -> ValidationReport {
    let mut issues = Vec::new();
    if !(profile.full_latency_ms.is_finite() && profile.full_latency_ms > 0.0) {
        issues.push(ProfileIssue::BadFullLatency(profile.full_latency_ms));
    }
    for head in Head::ALL {
        let count = profile.heads.iter().filter(|h| h.head == head).count();
        if count != 1 {
            issues.push(ProfileIssue::HeadMultiplicity { head, count });
        }
    }
    let mut sum = 0u64;
    for entry in &profile.heads {
        let head = entry.head;
        sum += entry.detections;
        if let Some(ms) = entry.latency_ms {
            if !(ms.is_finite() && ms > 0.0) {
                issues.push(ProfileIssue::BadHeadLatency { head, value: ms });
            }
        }
        if !(entry.speedup_vs_full.is_finite() && entry.speedup_vs_full > 0.0) {
            issues.push(ProfileIssue::BadSpeedup {
                head,
                value: entry.speedup_vs_full,
            });
        }
        if !(entry.flops_savings_pct.is_finite() && (0.0..100.0).contains(&entry.flops_savings_pct)) {
            issues.push(ProfileIssue::BadFlopsSavings {
                head,
                value: entry.flops_savings_pct,
            });
        }
        for (metric, value) in [
            ("map50", entry.map50),
            ("precision", entry.precision),
            ("recall", entry.recall),
        ] {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                issues.push(ProfileIssue::BadQualityMetric { head, metric, value });
            }
        }
        if let Some(ms) = entry.latency_ms {
            if ms > 0.0 && profile.full_latency_ms > 0.0 {
                let implied = profile.full_latency_ms / ms;
                if (implied - entry.speedup_vs_full).abs() > SPEEDUP_CONSISTENCY_TOL {
                    issues.push(ProfileIssue::SpeedupLatencyMismatch {
                        head,
                        implied,
                        declared: entry.speedup_vs_full,
                    });
                }
            }
        }
    }
    if sum != profile.total_detections {
        issues.push(ProfileIssue::DetectionSumMismatch {
            sum,
            total: profile.total_detections,
        });
    }
    ValidationReport { issues }
}

/// Bundled default profiles.
pub mod builtin {
    use super::DetectorProfile;

    pub const NANO_JSON: &str = include_str!("../data/profile_nano.json");
    pub const SMALL_JSON: &str = include_str!("../data/profile_small.json");
    pub const MEDIUM_JSON: &str = include_str!("../data/profile_medium.json");
    pub const DEPLOYMENT_JSON: &str = include_str!("../data/profile_deployment.json");

    pub const NAMES: [&str; 4] = ["nano", "small", "medium", "deployment"];

    pub fn json_by_name(name: &str) -> Option<&'static str> {
        match name {
            "nano" => Some(NANO_JSON),
            "small" => Some(SMALL_JSON),
            "medium" => Some(MEDIUM_JSON),
            "deployment" => Some(DEPLOYMENT_JSON),
            _ => None,
        }
    }

    /// A bundled profile by short name, if one exists. The bundled files are
    /// covered by golden tests, so parsing cannot fail.
    pub fn by_name(name: &str) -> Option<DetectorProfile> {
        json_by_name(name).map(|json| {
            DetectorProfile::from_json_str(json).expect("bundled profile must parse")
        })
    }

    pub fn nano() -> DetectorProfile {
        by_name("nano").unwrap()
    }

    pub fn small() -> DetectorProfile {
        by_name("small").unwrap()
    }

    pub fn medium() -> DetectorProfile {
        by_name("medium").unwrap()
    }

    /// The deployment profile: the only bundled profile with absolute
    /// latencies (full path 10.097 ms, isolated P3 6.686 ms). Its P4/P5
    /// entries are unmeasured and carry a conservative speedup of 1.
    pub fn deployment() -> DetectorProfile {
        by_name("deployment").unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(h: Head, speedup: f64, flops: f64, detections: u64) -> HeadProfile {
        HeadProfile {
            head: h,
            latency_ms: None,
            speedup_vs_full: speedup,
            flops_savings_pct: flops,
            detections,
            map50: 0.5,
            precision: 0.5,
            recall: 0.5,
        }
    }

    fn nano_like(full_latency_ms: f64) -> DetectorProfile {
        DetectorProfile {
            model_name: "nano-like".into(),
            full_latency_ms,
            total_detections: 590,
            heads: vec![
                head(Head::P3, 1.61, 25.08, 168),
                head(Head::P4, 1.45, 33.79, 277),
                head(Head::P5, 1.34, 32.71, 145),
            ],
        }
    }

    #[test]
    fn full_set_costs_the_full_path() {
        let profile = builtin::deployment();
        let ms = latency_for(&HeadSelection::full(), &profile).unwrap();
        assert_eq!(ms, 10.097);
    }

    #[test]
    fn p3_singleton_uses_measured_latency() {
        let profile = builtin::deployment();
        let ms = latency_for(&HeadSelection::only(Head::P3), &profile).unwrap();
        assert_eq!(ms, 6.686);
    }

    #[test]
    fn singleton_latency_derives_from_speedup() {
        // Full path pinned at 10.097 ms; P4 has no measured latency, so its
        // cost comes from dividing by its declared speedup.
        let profile = nano_like(10.097);
        let ms = latency_for(&HeadSelection::only(Head::P4), &profile).unwrap();
        assert!((ms - 6.963).abs() < 0.01, "got {ms}");
    }

    #[test]
    fn pair_subset_costs_the_worst_member() {
        let profile = nano_like(10.097);
        let pair = HeadSelection::new(&[Head::P4, Head::P5]).unwrap();
        let ms = latency_for(&pair, &profile).unwrap();
        assert_eq!(ms, latency_for(&HeadSelection::only(Head::P5), &profile).unwrap());
    }

    #[test]
    fn latency_is_monotone_under_selection_growth() {
        let profile = nano_like(10.097);
        let subsets = [
            HeadSelection::only(Head::P3),
            HeadSelection::new(&[Head::P3, Head::P4]).unwrap(),
            HeadSelection::full(),
        ];
        let costs: Vec<f64> = subsets
            .iter()
            .map(|s| latency_for(s, &profile).unwrap())
            .collect();
        assert!(costs[0] <= costs[1] && costs[1] <= costs[2]);
    }

    #[test]
    fn flops_savings_projection() {
        let nano = builtin::nano();
        assert_eq!(
            flops_savings_for(&HeadSelection::only(Head::P3), &nano).unwrap(),
            25.08
        );
        assert_eq!(flops_savings_for(&HeadSelection::full(), &nano).unwrap(), 0.0);
        let medium = builtin::medium();
        assert_eq!(
            flops_savings_for(&HeadSelection::only(Head::P5), &medium).unwrap(),
            18.33
        );
        // A pair takes the least optimistic member.
        let pair = HeadSelection::new(&[Head::P3, Head::P4]).unwrap();
        assert_eq!(flops_savings_for(&pair, &nano).unwrap(), 25.08);
    }

    #[test]
    fn validate_accepts_consistent_profile() {
        let report = validate_profile(&nano_like(1.0));
        assert!(report.is_consistent(), "{report}");
    }

    #[test]
    fn validate_flags_detection_sum_mismatch() {
        let mut profile = nano_like(1.0);
        profile.total_detections = 589;
        let report = validate_profile(&profile);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ProfileIssue::DetectionSumMismatch { sum: 590, total: 589 })));
    }

    #[test]
    fn validate_flags_speedup_latency_mismatch() {
        let mut profile = nano_like(13.0);
        profile.heads[0].latency_ms = Some(10.0); // implied speedup 1.3
        profile.heads[0].speedup_vs_full = 2.0;
        let report = validate_profile(&profile);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ProfileIssue::SpeedupLatencyMismatch { head: Head::P3, .. })));
    }

    #[test]
    fn validate_flags_missing_head() {
        let mut profile = nano_like(1.0);
        profile.heads.remove(1);
        let report = validate_profile(&profile);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ProfileIssue::HeadMultiplicity { head: Head::P4, count: 0 })));
        assert!(matches!(
            latency_for(&HeadSelection::only(Head::P4), &profile),
            Err(CostModelError::MissingHead { .. })
        ));
    }

    #[test]
    fn bundled_profiles_are_consistent() {
        for name in builtin::NAMES {
            let profile = builtin::by_name(name).unwrap();
            let report = validate_profile(&profile);
            assert!(report.is_consistent(), "{name}: {report}");
        }
    }

    #[test]
    fn bundled_profiles_reserialize_identically() {
        for name in builtin::NAMES {
            let raw: serde_json::Value =
                serde_json::from_str(builtin::json_by_name(name).unwrap()).unwrap();
            let profile = builtin::by_name(name).unwrap();
            assert_eq!(serde_json::to_value(&profile).unwrap(), raw, "profile {name}");
        }
    }
}
