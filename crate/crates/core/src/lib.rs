//! Simulation and closed-form steady-state analysis of a single-server queue
//! whose customers carry continuous priority levels in `[0, 1]` and are
//! scheduled preemptively, highest priority first.
//!
//! * [`measure_state`]: the queue state as a point measure on `[0, 1]`.
//! * [`analytic`]: exact steady-state results as functions of priority.
//! * [`simulator`]: event-driven simulation with reproducible random streams.
//! * [`estimators`]: binned, interpolated estimates from simulated traces.
//! * [`experiment`] / [`verify`]: replicated runs and the verification suite.
//! * [`cli`]: the `cpq` command line.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod measure_state;
pub mod simulator;
pub mod streams;
pub mod verify;

pub use analytic::{AnalyticParams, GeometricLaw, QuantileMap};
pub use error::{AnalyticError, EstimateError, SimError, StateError};
pub use estimators::{BinGrid, BinnedEstimate, InfinityMode, Metric, ReplicatedEstimate};
pub use measure_state::{Interval, PointMeasure, PriorityLevel};
pub use simulator::{CustomerRecord, SimConfig, SimTrace, Snapshot, SnapshotPolicy};
