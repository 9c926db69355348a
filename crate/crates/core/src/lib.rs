//! Event-triggered time coordination for fleets of vehicles that follow
//! desired trajectories.
//!
//! Each vehicle owns a scalar virtual time `gamma_i` that selects its virtual
//! target on a Bezier trajectory. A decentralized second-order law drives the
//! virtual times into agreement while their rates track a desired pace.
//! Neighbors do not exchange state continuously: every agent runs a shared
//! estimator of its own virtual time and broadcasts only when the estimate
//! drifts past a threshold.
//!
//! The crate is split along those lines:
//!
//! - [`graph`]: communication digraph, adjacency/Laplacian, spanning tree check
//! - [`linalg`]: small dense eigenvalue and norm helpers
//! - [`algebra`]: projection matrix, reduced Laplacian, Lyapunov certificate,
//!   convergence rate and inter-event bounds
//! - [`trajectory`]: Bezier trajectories and virtual-target kinematics
//! - [`pace`] and [`etc`]: desired pace profile, estimators, trigger and event log
//! - [`coordination`]: the per-agent coordination controller
//! - [`vehicle`]: kinematic path-following stand-in and disturbances
//! - [`sim`]: the fixed-step engine and run analyses
//! - [`scenario`] and [`report`]: scenario files, validation and CLI artifacts

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod coordination;
pub mod error;
pub mod etc;
pub mod graph;
pub mod linalg;
pub mod pace;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod trajectory;
pub mod vehicle;

pub use algebra::{GainSet, LyapunovCertificate, QMatrix};
pub use coordination::{CoordinationErrorState, CoordinationState};
pub use error::{Error, Result};
pub use etc::{EstimatorState, EventRecord, ThresholdFunction};
pub use graph::{Digraph, LaplacianMatrix};
pub use pace::PaceProfile;
pub use scenario::{Diagnostic, ScenarioFile, Severity};
pub use sim::{run, Certificate, RunResult, Scenario, Summary};
pub use trajectory::{BezierTrajectory, TrajectorySet};
pub use vehicle::{PfConfig, VehicleState};

pub use nalgebra::{DMatrix, DVector, Vector3};
