//! End-to-end runs: configuration, the design pipeline, result files and
//! performance profiles.

mod cms;
mod config;
mod profile;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::control::ControlError;
use crate::lp::LpStatus;
use crate::obbt::ObbtError;
use crate::relaxation::RelaxError;
use crate::sampler::SampleError;

pub use cms::{
    baseline, run_cms, run_control_only, run_obbt, Baseline, CandidateRecord, CandidateStatus, CmsSolution,
    ControlReport, DesignReport, RelaxationReport, TimestepReport,
};
pub use config::{
    load_network, select_timesteps, BoundsConfig, ObbtConfig, ObjectiveConfig, RunConfig, SamplingConfig,
    LARGE_NETWORK_LINKS,
};
pub use profile::{parse_results_csv, performance_profile, PerformanceProfile, ProfileError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Obbt(#[from] ObbtError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("no feasible controls for any of {candidates} candidate designs")]
    AllInfeasible { candidates: usize },
}

fn relax_code(e: &RelaxError) -> i32 {
    match e {
        RelaxError::TooManyValves { .. } => 2,
        RelaxError::InconsistentBounds { .. } | RelaxError::NotOptimal(LpStatus::Infeasible) => 3,
        RelaxError::NotOptimal(_) => 1,
    }
}

impl PipelineError {
    /// Process exit code: 2 for input and configuration problems, 3 when
    /// no feasible solution exists, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Model(crate::Error::Hydraulic(_)) => 1,
            PipelineError::Config(_)
            | PipelineError::Read { .. }
            | PipelineError::Model(_)
            | PipelineError::Profile(_) => 2,
            PipelineError::Relax(e) | PipelineError::Obbt(ObbtError::Relax(e)) => relax_code(e),
            PipelineError::Obbt(ObbtError::Lp { status, .. }) => {
                if *status == LpStatus::Infeasible {
                    3
                } else {
                    1
                }
            }
            PipelineError::AllInfeasible { .. }
            | PipelineError::Control(ControlError::AllStartsInfeasible { .. } | ControlError::Infeasible { .. }) => 3,
            PipelineError::Write { .. } | PipelineError::Sample(_) | PipelineError::Control(_) => 1,
        }
    }
}
