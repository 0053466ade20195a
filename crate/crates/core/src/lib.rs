//! Trajectory-aware adaptive inference control for multi-head object
//! detectors.
//!
//! GPS trajectories of tracked vessels are turned into per-second motion
//! cues (pairwise distance and closure rate); a threshold policy maps each
//! second to the subset of detection heads worth running; a per-head cost
//! model projects the latency and FLOPs impact of those choices; and a
//! scale-aware planner derives per-head learning rates from the size
//! composition of a bounding-box corpus.
//!
//! - [`geo_motion`]: great-circle distances, closure rates, motion windows
//! - [`ingest`]: file formats, parsing/validation, frame-window alignment
//! - [`policy`]: the head-selection criterion and its configuration
//! - [`lr_planner`]: size composition and learning-rate schedules
//! - [`cost_model`]: detector profiles and cost projection
//! - [`sim`]: end-to-end replay, reporting, and synthetic fixtures

pub mod cost_model;
pub mod geo_motion;
pub mod ingest;
pub mod lr_planner;
pub mod policy;
pub mod sim;

pub use cost_model::{DetectorProfile, HeadProfile};
pub use geo_motion::{GeoFix, MotionWindow, Trajectory};
pub use ingest::{BBoxRecord, DetectionRecord, FrameStreamMeta, FrameWindowMap, TrajectoryFormat};
pub use lr_planner::{LrSchedule, ScaleThresholds};
pub use policy::{Head, HeadSelection, PolicyConfig};
pub use sim::{SimulationReport, SimulationRun};
