use serde::{Deserialize, Serialize};

use super::NetworkModel;

/// Size of the design-for-control problem for a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemStats {
    pub n_links: usize,
    pub n_nodes: usize,
    pub n_sources: usize,
    pub n_timesteps: usize,
    pub existing_prvs: usize,
    pub existing_dbvs: usize,
    pub continuous: usize,
    pub binary: usize,
    pub nonconvex: usize,
}

impl ProblemStats {
    /// Variable counts from the raw dimensions.
    pub fn from_dims(n_links: usize, n_nodes: usize, n_timesteps: usize) -> Self {
        ProblemStats {
            n_links,
            n_nodes,
            n_sources: 0,
            n_timesteps,
            existing_prvs: 0,
            existing_dbvs: 0,
            continuous: n_timesteps * (3 * n_links + 2 * n_nodes),
            binary: 2 * n_timesteps * n_links + n_links + n_nodes,
            nonconvex: 2 * n_timesteps * n_links,
        }
    }
}

pub fn problem_stats(net: &NetworkModel, n_timesteps: usize) -> ProblemStats {
    ProblemStats {
        n_sources: net.n_sources(),
        existing_prvs: net.links.iter().filter(|l| l.is_existing_prv).count(),
        existing_dbvs: net.links.iter().filter(|l| l.is_existing_dbv).count(),
        ..ProblemStats::from_dims(net.n_links(), net.n_nodes(), n_timesteps)
    }
}
