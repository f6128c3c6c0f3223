//! Informative path planning for tracking wind-drifting surface targets.
//!
//! The crate is organised around the closed sensing loop of a surface vehicle:
//!
//! * [`scenario`] — configuration, validation, seeded world construction.
//! * [`environment`] — ground-truth wind, target drift and vehicle motion.
//! * [`perception`] — field-of-view geometry and simulated detections.
//! * [`mapping`] — the dynamic occupancy grid (estimation + drift prediction).
//! * [`predictor`] — analytic spatiotemporal target-position prediction.
//! * [`planner`] — Bézier candidates, the entropy + tracking utility, planners.
//! * [`metrics`] — entropy, filtered MSE and mean detections.
//! * [`harness`] — episodes, Monte-Carlo sweeps, trace files and CSV output.

pub mod environment;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mapping;
pub mod metrics;
pub mod perception;
pub mod planner;
pub mod predictor;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use geometry::{Point, Pose};
pub use scenario::{ScenarioConfig, World};
