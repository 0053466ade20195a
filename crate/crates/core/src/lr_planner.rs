//! Scale-aware learning-rate planning.
//!
//! Each annotated box is sized by the geometric mean of its pixel dimensions
//! and binned into a small/medium/large category feeding one detection head.
//! Category weights times instance fractions, normalized by the maximum,
//! give per-head rate factors; the dominant category trains at the base rate
//! and the neck at a fixed 0.8 of it. No backbone rate is prescribed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::BBoxRecord;
use crate::policy::Head;

/// Fixed neck learning-rate factor relative to the base rate.
pub const NECK_RATE_FACTOR: f64 = 0.8;

/// Floor applied (relative to the base rate) when a category has no
/// instances, so the corresponding head is never frozen outright.
pub const ZERO_RATE_FLOOR: f64 = 0.01;

#[derive(Debug, Error)]
pub enum LrError {
    #[error("scale thresholds must satisfy 0 < small_max < medium_max, got {small_max} / {medium_max}")]
    InvalidThresholds { small_max: f64, medium_max: f64 },
    #[error("category weights must be positive and finite, got {0}")]
    InvalidWeight(f64),
    #[error("cannot compose an empty corpus: category fractions are undefined")]
    EmptyCorpus,
    #[error("base learning rate must be positive and finite, got {0}")]
    InvalidBaseRate(f64),
}

/// Object-size category, each served by one detection head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleCategory {
    Small,
    Medium,
    Large,
}

impl ScaleCategory {
    pub const ALL: [ScaleCategory; 3] = [ScaleCategory::Small, ScaleCategory::Medium, ScaleCategory::Large];

    pub fn head(self) -> Head {
        match self {
            ScaleCategory::Small => Head::P3,
            ScaleCategory::Medium => Head::P4,
            ScaleCategory::Large => Head::P5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScaleCategory::Small => "small",
            ScaleCategory::Medium => "medium",
            ScaleCategory::Large => "large",
        }
    }
}

/// Pixel cut points between the size categories: small below `small_max`,
/// large at or above `medium_max`, medium in between. Left-inclusive, so a
/// box measuring exactly `small_max` is medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleThresholds {
    pub small_max: f64,
    pub medium_max: f64,
}

impl ScaleThresholds {
    pub fn new(small_max: f64, medium_max: f64) -> Result<Self, LrError> {
        if !(small_max.is_finite() && medium_max.is_finite() && 0.0 < small_max && small_max < medium_max) {
            return Err(LrError::InvalidThresholds { small_max, medium_max });
        }
        Ok(Self { small_max, medium_max })
    }
}

impl Default for ScaleThresholds {
    fn default() -> Self {
        Self {
            small_max: 32.0,
            medium_max: 96.0,
        }
    }
}

/// Per-category difficulty weights; higher values favor harder cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryWeights {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
}

impl CategoryWeights {
    pub fn new(small: f64, medium: f64, large: f64) -> Result<Self, LrError> {
        for w in [small, medium, large] {
            if !(w.is_finite() && w > 0.0) {
                return Err(LrError::InvalidWeight(w));
            }
        }
        Ok(Self { small, medium, large })
    }

    pub fn get(&self, category: ScaleCategory) -> f64 {
        match category {
            ScaleCategory::Small => self.small,
            ScaleCategory::Medium => self.medium,
            ScaleCategory::Large => self.large,
        }
    }
}

impl Default for CategoryWeights {
    fn default() -> Self {
        Self {
            small: 1.5,
            medium: 1.0,
            large: 0.7,
        }
    }
}

/// Composition of one size category within a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CategoryComposition {
    pub category: ScaleCategory,
    pub head: Head,
    pub count: u64,
    /// Fraction of all instances falling in this category.
    pub f: f64,
    pub omega: f64,
    /// Weighted fraction normalized by the maximum across categories.
    pub r: f64,
}

/// Size composition of a whole corpus, one entry per category in
/// small/medium/large order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleComposition {
    pub total: u64,
    pub categories: [CategoryComposition; 3],
}

impl ScaleComposition {
    pub fn category(&self, category: ScaleCategory) -> &CategoryComposition {
        &self.categories[category as usize]
    }
}

/// Per-component learning rates derived from a [`ScaleComposition`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrSchedule {
    pub eta0: f64,
    pub eta_p3: f64,
    pub eta_p4: f64,
    pub eta_p5: f64,
    pub eta_neck: f64,
}

impl LrSchedule {
    pub fn for_head(&self, head: Head) -> f64 {
        match head {
            Head::P3 => self.eta_p3,
            Head::P4 => self.eta_p4,
            Head::P5 => self.eta_p5,
        }
    }
}

/// Size metric of a box: the geometric mean of its pixel dimensions.
pub fn size_metric(bbox: &BBoxRecord) -> f64 {
    (bbox.width * bbox.height).sqrt()
}

/// Bins a box into its size category by [`size_metric`].
pub fn categorize(bbox: &BBoxRecord, thresholds: &ScaleThresholds) -> ScaleCategory {
    let m = size_metric(bbox);
    if m < thresholds.small_max {
        ScaleCategory::Small
    } else if m < thresholds.medium_max {
        ScaleCategory::Medium
    } else {
        ScaleCategory::Large
    }
}

/// Computes per-category counts, fractions, and normalized rate factors for
/// a corpus. Categories with no instances get `f = 0` and `r = 0`.
pub fn compose(
    corpus: &[BBoxRecord],
    thresholds: &ScaleThresholds,
    weights: &CategoryWeights,
) -> Result<ScaleComposition, LrError> {
    ScaleThresholds::new(thresholds.small_max, thresholds.medium_max)?;
    CategoryWeights::new(weights.small, weights.medium, weights.large)?;
    if corpus.is_empty() {
        return Err(LrError::EmptyCorpus);
    }
    let mut counts = [0u64; 3];
    for bbox in corpus {
        counts[categorize(bbox, thresholds) as usize] += 1;
    }
    let total = corpus.len() as u64;
    let fractions: [f64; 3] = std::array::from_fn(|i| counts[i] as f64 / total as f64);
    let scores: [f64; 3] = std::array::from_fn(|i| weights.get(ScaleCategory::ALL[i]) * fractions[i]);
    let max_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let categories = std::array::from_fn(|i| {
        let category = ScaleCategory::ALL[i];
        CategoryComposition {
            category,
            head: category.head(),
            count: counts[i],
            f: fractions[i],
            omega: weights.get(category),
            r: scores[i] / max_score,
        }
    });
    Ok(ScaleComposition { total, categories })
}

/// Derives the per-component schedule: `eta_head = r * eta0` for each head,
/// with a [`ZERO_RATE_FLOOR`] for empty categories, and a fixed neck rate of
/// [`NECK_RATE_FACTOR`] times the base.
pub fn schedule(composition: &ScaleComposition, eta0: f64) -> Result<LrSchedule, LrError> {
    if !(eta0.is_finite() && eta0 > 0.0) {
        return Err(LrError::InvalidBaseRate(eta0));
    }
    let rate = |category: ScaleCategory| {
        let r = composition.category(category).r;
        if r == 0.0 {
            log::warn!(
                "category `{}` has no instances; flooring its head rate at {ZERO_RATE_FLOOR} * eta0",
                category.as_str()
            );
            ZERO_RATE_FLOOR * eta0
        } else {
            r * eta0
        }
    };
    Ok(LrSchedule {
        eta0,
        eta_p3: rate(ScaleCategory::Small),
        eta_p4: rate(ScaleCategory::Medium),
        eta_p5: rate(ScaleCategory::Large),
        eta_neck: NECK_RATE_FACTOR * eta0,
    })
}

/// Full JSON export of a plan: the schedule, the composition behind it, and
/// an explicit marker that no backbone rate is prescribed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrPlan {
    pub eta0: f64,
    pub eta_p3: f64,
    pub eta_p4: f64,
    pub eta_p5: f64,
    pub eta_neck: f64,
    pub backbone: &'static str,
    pub categories: [CategoryComposition; 3],
}

impl LrPlan {
    pub fn new(composition: &ScaleComposition, schedule: &LrSchedule) -> Self {
        Self {
            eta0: schedule.eta0,
            eta_p3: schedule.eta_p3,
            eta_p4: schedule.eta_p4,
            eta_p5: schedule.eta_p5,
            eta_neck: schedule.eta_neck,
            backbone: "unspecified",
            categories: composition.categories,
        }
    }
}

fn fmt_px(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

fn fmt_weight(v: f64) -> String {
    if (v * 10.0).fract() == 0.0 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

/// Renders the composition and schedule as an aligned text table, one row per
/// size category plus the fixed neck row.
pub fn render_table(
    composition: &ScaleComposition,
    schedule: &LrSchedule,
    thresholds: &ScaleThresholds,
) -> String {
    let mut rows: Vec<[String; 7]> = vec![[
        "Component".into(),
        "Size range".into(),
        "Instances".into(),
        "f_k (%)".into(),
        "omega_k".into(),
        "r_k".into(),
        "eta".into(),
    ]];
    let names = ["Small (P3)", "Medium (P4)", "Large (P5)"];
    let ranges = [
        format!("s < {} px", fmt_px(thresholds.small_max)),
        format!(
            "{} <= s < {} px",
            fmt_px(thresholds.small_max),
            fmt_px(thresholds.medium_max)
        ),
        format!("s >= {} px", fmt_px(thresholds.medium_max)),
    ];
    for (i, cat) in composition.categories.iter().enumerate() {
        rows.push([
            names[i].into(),
            ranges[i].clone(),
            cat.count.to_string(),
            format!("{:.2}", cat.f * 100.0),
            fmt_weight(cat.omega),
            format!("{:.3}", cat.r),
            format!("{:.2e}", schedule.for_head(cat.head)),
        ]);
    }
    rows.push([
        "Neck".into(),
        "-".into(),
        "-".into(),
        "-".into(),
        "-".into(),
        format!("{NECK_RATE_FACTOR:.3} (fixed)"),
        format!("{:.2e}", schedule.eta_neck),
    ]);

    let widths: Vec<usize> = (0..7)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<width$}", width = widths[c]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox(w: f64, h: f64) -> BBoxRecord {
        BBoxRecord::new("img", "ASV", w, h).unwrap()
    }

    /// A corpus with the given per-category counts under default thresholds.
    fn corpus(small: usize, medium: usize, large: usize) -> Vec<BBoxRecord> {
        let mut boxes = Vec::new();
        boxes.extend((0..small).map(|_| bbox(20.0, 20.0)));
        boxes.extend((0..medium).map(|_| bbox(48.0, 48.0)));
        boxes.extend((0..large).map(|_| bbox(120.0, 120.0)));
        boxes
    }

    #[test]
    fn size_metric_is_the_geometric_mean() {
        assert_eq!(size_metric(&bbox(32.0, 32.0)), 32.0);
        assert_eq!(size_metric(&bbox(16.0, 64.0)), 32.0);
        let m = size_metric(&bbox(100.0, 50.0));
        assert!((m - 70.7107).abs() < 1e-4, "got {m}");
    }

    #[test]
    fn categorize_boundaries_are_left_inclusive() {
        let th = ScaleThresholds::default();
        assert_eq!(categorize(&bbox(31.9, 31.9), &th), ScaleCategory::Small);
        assert_eq!(categorize(&bbox(32.0, 32.0), &th), ScaleCategory::Medium);
        assert_eq!(categorize(&bbox(96.0, 96.0), &th), ScaleCategory::Large);
    }

    #[test]
    fn compose_reference_composition() {
        let comp = compose(
            &corpus(316, 767, 427),
            &ScaleThresholds::default(),
            &CategoryWeights::default(),
        )
        .unwrap();
        assert_eq!(comp.total, 1510);
        let expect = [
            (316, 20.93, 0.618),
            (767, 50.79, 1.000),
            (427, 28.28, 0.390),
        ];
        for (cat, (count, f_pct, r)) in comp.categories.iter().zip(expect) {
            assert_eq!(cat.count, count);
            assert!((cat.f * 100.0 - f_pct).abs() < 5e-4 * 100.0, "f {}", cat.f);
            assert!((cat.r - r).abs() < 5e-4, "r {}", cat.r);
        }
    }

    #[test]
    fn compose_degenerate_single_category() {
        let comp = compose(
            &corpus(0, 5, 0),
            &ScaleThresholds::default(),
            &CategoryWeights::default(),
        )
        .unwrap();
        assert_eq!(comp.category(ScaleCategory::Medium).f, 1.0);
        assert_eq!(comp.category(ScaleCategory::Medium).r, 1.0);
        assert_eq!(comp.category(ScaleCategory::Small).r, 0.0);
        assert_eq!(comp.category(ScaleCategory::Large).r, 0.0);
    }

    #[test]
    fn compose_uniform_counts_and_weights_tie_at_one() {
        let comp = compose(
            &corpus(7, 7, 7),
            &ScaleThresholds::default(),
            &CategoryWeights::new(1.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(comp.categories.iter().all(|c| c.r == 1.0));
    }

    #[test]
    fn compose_rejects_empty_corpus() {
        let err = compose(&[], &ScaleThresholds::default(), &CategoryWeights::default());
        assert!(matches!(err, Err(LrError::EmptyCorpus)));
    }

    #[test]
    fn schedule_reference_rates() {
        let comp = compose(
            &corpus(316, 767, 427),
            &ScaleThresholds::default(),
            &CategoryWeights::default(),
        )
        .unwrap();
        let sched = schedule(&comp, 1e-3).unwrap();
        assert!((sched.eta_p3 - 6.18e-4).abs() < 1e-6);
        assert!((sched.eta_p4 - 1.00e-3).abs() < 1e-6);
        assert!((sched.eta_p5 - 3.90e-4).abs() < 1e-6);
        assert_eq!(sched.eta_neck, 0.8 * 1e-3);
    }

    #[test]
    fn schedule_uniform_composition() {
        let comp = compose(
            &corpus(3, 3, 3),
            &ScaleThresholds::default(),
            &CategoryWeights::new(1.0, 1.0, 1.0).unwrap(),
        )
        .unwrap();
        let sched = schedule(&comp, 2e-3).unwrap();
        assert_eq!(sched.eta_p3, 2e-3);
        assert_eq!(sched.eta_p4, 2e-3);
        assert_eq!(sched.eta_p5, 2e-3);
        assert_eq!(sched.eta_neck, 0.8 * 2e-3);
    }

    #[test]
    fn schedule_floors_empty_categories() {
        let comp = compose(
            &corpus(0, 5, 3),
            &ScaleThresholds::default(),
            &CategoryWeights::default(),
        )
        .unwrap();
        let sched = schedule(&comp, 1e-3).unwrap();
        assert_eq!(sched.eta_p3, 1e-5);
    }

    #[test]
    fn schedule_doubles_linearly() {
        let comp = compose(
            &corpus(316, 767, 427),
            &ScaleThresholds::default(),
            &CategoryWeights::default(),
        )
        .unwrap();
        let a = schedule(&comp, 1e-3).unwrap();
        let b = schedule(&comp, 2e-3).unwrap();
        assert_eq!(b.eta_p3, 2.0 * a.eta_p3);
        assert_eq!(b.eta_p4, 2.0 * a.eta_p4);
        assert_eq!(b.eta_p5, 2.0 * a.eta_p5);
        assert_eq!(b.eta_neck, 2.0 * a.eta_neck);
    }

    #[test]
    fn table_shows_reference_cells() {
        let comp = compose(
            &corpus(316, 767, 427),
            &ScaleThresholds::default(),
            &CategoryWeights::default(),
        )
        .unwrap();
        let sched = schedule(&comp, 1e-3).unwrap();
        let table = render_table(&comp, &sched, &ScaleThresholds::default());
        for cell in [
            "316", "767", "427", "20.93", "50.79", "28.28", "0.618", "1.000", "0.390", "6.18e-4",
            "1.00e-3", "3.90e-4", "8.00e-4", "s < 32 px", "32 <= s < 96 px", "s >= 96 px",
        ] {
            assert!(table.contains(cell), "table missing `{cell}`:\n{table}");
        }
    }

    #[test]
    fn plan_export_carries_backbone_marker() {
        let comp = compose(
            &corpus(1, 1, 1),
            &ScaleThresholds::default(),
            &CategoryWeights::default(),
        )
        .unwrap();
        let sched = schedule(&comp, 1e-3).unwrap();
        let json = serde_json::to_value(LrPlan::new(&comp, &sched)).unwrap();
        assert_eq!(json["backbone"], "unspecified");
        assert_eq!(json["categories"][0]["head"], "P3");
        assert!(json["eta_p4"].is_number());
    }
}
