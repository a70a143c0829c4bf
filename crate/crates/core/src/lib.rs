//! Sparse minimum-precision sensor scheduling for multi-agent tracking.
//!
//! The pipeline runs nonlinear agent models ([`dynamics`]) through
//! linearization and discretization ([`discretization`]), range sensing
//! ([`sensing`]) and a batch Kalman model ([`kalman`]), then chooses
//! per-step sensor precisions by a reweighted ℓ1 semidefinite program
//! ([`precision_opt`], solved by [`conic`]).

pub mod conic;
pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod kalman;
pub mod linalg;
pub mod precision_opt;
pub mod scenario;
pub mod sensing;

pub use nalgebra::{DMatrix, DVector};
pub use conic::{ConicSolution, ConicStatus, SdpProblem, SolveOptions};
pub use discretization::{ContinuousNoiseSpec, DiscreteLtvSystem, DiscreteStep, GaussianState};
pub use dynamics::{AgentKind, AgentModel, MultiAgentConfig, NominalTrajectory};
pub use error::{Error, Result};
pub use kalman::BatchSystem;
pub use precision_opt::{PrecisionProblem, PrecisionSchedule, ScheduleStatus};
pub use scenario::{Horizon, ScenarioSpec};
pub use sensing::{AvailabilityMask, SensingTopology};
