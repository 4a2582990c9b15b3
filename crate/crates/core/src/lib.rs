//! Transmit/receive beamforming for QoS-constrained power minimization in the
//! multi-user MIMO downlink.
//!
//! Two solvers share one engine: [`solver::Algorithm::MmseDual`] (MMSE
//! receivers, a multiplier fixed point and uplink-MMSE transmit directions)
//! and [`solver::Algorithm::Udd`] (alternating uplink/downlink power control
//! through uplink-downlink duality). Both run unchanged on multi-stream
//! layouts with successive interference cancellation. [`kkt`] certifies the
//! result independently of the solver.

pub mod beamforming;
pub mod fixtures;
pub mod init;
pub mod kkt;
pub mod layout;
pub mod linalg;
pub mod mmse_dual;
pub mod multistream;
pub mod power;
pub mod problem;
pub mod scenario;
pub mod solution;
pub mod solver;
pub mod sweep;
pub mod trace;
pub mod udd;

pub use beamforming::{DualVariables, RxBeamformers, TxBeamformers};
pub use init::InitMode;
pub use layout::{StreamId, StreamLayout};
pub use problem::Problem;
pub use scenario::{Channel, QosTargets, Scenario, ScenarioError, SystemConfig};
pub use solver::{solve, Algorithm, FailureKind, SolveFailure, SolveOptions, SolveResult, SolveStatus};
pub use trace::{Trace, TraceRow};
