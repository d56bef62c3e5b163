//! Deterministic traffic-signal-control benchmark: a lane-queue intersection
//! simulator, classical controllers, a tool-calling decision agent and the
//! experiment harness that scores them.

pub mod agent;
pub mod control;
pub mod controllers;
pub mod harness;
pub mod metrics;
pub mod net;
pub mod sim;
pub mod tools;

pub use metrics::{compute_metrics, compare_runs, MetricsReport, TripRecord};
pub use net::{load_network, PhaseId, RoadNetwork};
pub use sim::{init_simulation, DemandProfile, EventSchedule, ScenarioKind, SimError, SimState};
