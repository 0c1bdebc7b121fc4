//! Adaptive compensation of unknown multiharmonic disturbances for MIMO LTI
//! plants.
//!
//! The pipeline: an unknown-input observer recovers the plant state despite
//! the disturbance, a disturbance observer recovers the state of a designer
//! filter bank driven by the disturbance, and an adaptive law tunes the
//! feedback `u = −Ψ̂·ξ̂` towards the regulator-equation solution.

pub mod adapt;
pub mod batch;
pub mod cli;
pub mod dobs;
pub mod error;
pub mod golden;
pub mod model;
pub mod numerics;
pub mod regulator;
pub mod scenario;
pub mod sim;
pub mod uio;

pub use error::{Assumption, Error, Result};
pub use numerics::{Matrix, Vector};
pub use scenario::{load_scenario, parse_scenario, parse_scenario_str, serialize_scenario};
pub use sim::{run_scenario, settling_time, Algorithm, DobsInput, Metrics, ScenarioConfig, Trace};
