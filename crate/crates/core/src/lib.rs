//! Valve placement and control for self-cleaning water distribution networks.
//!
//! The crate finds locations and settings for pressure control valves and
//! automatic flushing valves that maximise the length fraction of pipes whose
//! peak velocity exceeds a resuspension threshold. The pipeline solves a
//! polyhedral relaxation of the mixed-integer problem, samples integer valve
//! placements from its fractional solution, and optimises the controls of each
//! sampled placement with a feasible sequential convex programming method.

pub mod control;
pub mod envelopes;
pub mod fixtures;
pub mod hydraulics;
pub mod lp;
pub mod network;
pub mod obbt;
pub mod objective;
pub mod pipeline;
pub mod relaxation;
pub mod sampler;

pub use network::{
    forest_core, problem_stats, ForestCoreDecomposition, Link, LinkKind, NetworkBuilder, NetworkError, NetworkModel,
    NodeRef, ProblemStats,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Inp(#[from] network::inp::InpError),
    #[error(transparent)]
    Hydraulic(#[from] hydraulics::HydraulicError),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
