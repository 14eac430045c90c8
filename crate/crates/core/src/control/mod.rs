//! Control optimisation for a fixed valve placement.
//!
//! Timesteps are hydraulically independent, so every timestep is solved on
//! its own: each direction pattern of the bidirectional valves gets a
//! multi-start run, and every start is restored to feasibility and then
//! improved by sequential linear programming with a feasibility-keeping
//! line search.

mod restore;
mod search;
mod sfscp;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hydraulics::{HydraulicError, HydraulicSolver};
use crate::network::NetworkModel;
use crate::objective::{scc_smooth_timestep, scc_smooth_timestep_grad, SccParams};
use crate::relaxation::BoundSet;

pub use restore::{restore_feasibility, RestoreOptions};
pub use search::{
    enumerate_dbv_directions, enumerate_seeded, multi_start, multi_start_seeded, solve_controls, solve_controls_seeded,
    MultiStartConfig, TIE_TOL,
};
pub use sfscp::{sfscp_solve, SfscpOptions, SfscpResult, TraceRow};

/// Flow tolerance (m³/s) for bound and direction checks.
pub const FLOW_TOL: f64 = 1e-7;
/// Head tolerance (m) for pressure checks.
pub const HEAD_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("no start reaches a feasible state at timestep {t}")]
    AllStartsInfeasible { t: usize },
    #[error("restoration failed: remaining violation {violation:.3e}")]
    Infeasible { violation: f64 },
    #[error("start point is not feasible (violation {violation:.3e})")]
    InfeasibleStart { violation: f64 },
    #[error(transparent)]
    Hydraulic(#[from] HydraulicError),
}

/// Direction a valve acts in: along the link (`v⁺`) or against it (`v⁻`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

/// Valves in place for a control problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlDesign {
    /// Unidirectional pressure reducing valves.
    pub prv_links: Vec<usize>,
    /// Bidirectional control valves, existing and newly placed.
    pub dbv_links: Vec<usize>,
    /// Nodes with a flushing valve.
    pub afv_nodes: Vec<usize>,
    /// Links held shut.
    #[serde(default)]
    pub closed_links: Vec<usize>,
}

impl ControlDesign {
    /// The valves already present in the network.
    pub fn existing(net: &NetworkModel) -> Self {
        ControlDesign {
            prv_links: (0..net.n_links()).filter(|&j| net.links[j].is_existing_prv).collect(),
            dbv_links: (0..net.n_links()).filter(|&j| net.links[j].is_existing_dbv).collect(),
            afv_nodes: Vec::new(),
            closed_links: Vec::new(),
        }
    }

    /// Existing valves plus the given new control valves and flushing nodes.
    pub fn with_additions(net: &NetworkModel, dbv_links: &[usize], afv_nodes: &[usize]) -> Self {
        let mut d = Self::existing(net);
        d.dbv_links.extend_from_slice(dbv_links);
        d.dbv_links.sort_unstable();
        d.dbv_links.dedup();
        d.afv_nodes = afv_nodes.to_vec();
        d.afv_nodes.sort_unstable();
        d
    }

    pub fn n_patterns(&self) -> usize {
        1 << self.dbv_links.len()
    }

    /// Directions of the bidirectional valves for pattern `p`: bit `k` set
    /// reverses valve `k`.
    pub fn pattern(&self, p: usize) -> Vec<Direction> {
        (0..self.dbv_links.len())
            .map(|k| {
                if p >> k & 1 == 1 {
                    Direction::Reverse
                } else {
                    Direction::Forward
                }
            })
            .collect()
    }
}

/// Simulated outcome of one control vector at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub h: Vec<f64>,
    pub f: f64,
    /// Largest flow-bound or direction violation (m³/s).
    pub flow_violation: f64,
    /// Largest head-bound violation (m).
    pub head_violation: f64,
    pub mass_residual: f64,
    pub energy_residual: f64,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.flow_violation <= FLOW_TOL && self.head_violation <= HEAD_TOL
    }
}

/// One timestep with a fixed direction pattern. The control vector holds
/// the valve losses of `valves` followed by the flushing rates of `afv`.
#[derive(Debug, Clone)]
pub struct TimestepProblem<'a> {
    pub solver: &'a HydraulicSolver<'a>,
    pub scc: &'a SccParams,
    pub bounds: &'a BoundSet,
    pub t: usize,
    pub valves: Vec<(usize, Direction)>,
    pub afv: Vec<usize>,
    pub closed: Vec<bool>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl<'a> TimestepProblem<'a> {
    pub fn new(
        solver: &'a HydraulicSolver<'a>,
        scc: &'a SccParams,
        bounds: &'a BoundSet,
        t: usize,
        design: &ControlDesign,
        pattern: &[Direction],
    ) -> Self {
        let net = solver.net;
        let mut valves: Vec<(usize, Direction)> = design.prv_links.iter().map(|&j| (j, Direction::Forward)).collect();
        valves.extend(design.dbv_links.iter().copied().zip(pattern.iter().copied()));
        let mut closed = vec![false; net.n_links()];
        design.closed_links.iter().for_each(|&j| closed[j] = true);
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for &(j, dir) in &valves {
            let (lo, hi) = match dir {
                Direction::Forward => (0.0, bounds.eta_upper[t][j].max(0.0)),
                Direction::Reverse => (bounds.eta_lower[t][j].min(0.0), 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        for _ in &design.afv_nodes {
            lower.push(0.0);
            upper.push(bounds.alpha_upper);
        }
        TimestepProblem {
            solver,
            scc,
            bounds,
            t,
            valves,
            afv: design.afv_nodes.clone(),
            closed,
            lower,
            upper,
        }
    }

    pub fn n_controls(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }

    /// Full-length valve loss and flushing vectors for a control vector.
    pub fn expand(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let net = self.solver.net;
        let mut eta = vec![0.0; net.n_links()];
        let mut alpha = vec![0.0; net.n_nodes()];
        for (k, &(j, _)) in self.valves.iter().enumerate() {
            eta[j] = x[k];
        }
        let nv = self.valves.len();
        for (m, &i) in self.afv.iter().enumerate() {
            alpha[i] = x[nv + m];
        }
        (eta, alpha)
    }

    /// Control vector read back from full-length vectors.
    pub fn compress(&self, eta: &[f64], alpha: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = self.valves.iter().map(|&(j, _)| eta[j]).collect();
        x.extend(self.afv.iter().map(|&i| alpha[i]));
        x
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, HydraulicError> {
        let (eta, alpha) = self.expand(x);
        let sol = self.solver.solve(self.t, &eta, &alpha, &self.closed)?;
        let (mass_residual, energy_residual) =
            self.solver
                .residuals(self.t, &sol.q, &sol.h, &eta, &alpha, &self.closed);
        let b = self.bounds;
        let t = self.t;
        let mut fv: f64 = 0.0;
        for (j, &q) in sol.q.iter().enumerate() {
            fv = fv.max(b.q_lower[t][j] - q).max(q - b.q_upper[t][j]);
        }
        for &(j, dir) in &self.valves {
            fv = fv.max(-dir.sign() * sol.q[j]);
        }
        let mut hv: f64 = 0.0;
        for (i, &h) in sol.h.iter().enumerate() {
            hv = hv.max(b.h_min[t][i] - h).max(h - b.h_max[t][i]);
        }
        Ok(Evaluation {
            f: scc_smooth_timestep(&sol.q, self.solver.net, self.scc),
            x: x.to_vec(),
            q: sol.q,
            h: sol.h,
            flow_violation: fv,
            head_violation: hv,
            mass_residual,
            energy_residual,
        })
    }

    /// Gradient of a function of the solved state with respect to the
    /// controls, given its partial derivatives in `q` and `h`.
    pub fn chain(&self, q: &[f64], dq: &[f64], dh: &[f64]) -> Result<Vec<f64>, HydraulicError> {
        let (x, y) = self.solver.adjoint(q, dq, dh, &self.closed)?;
        let mut g: Vec<f64> = self.valves.iter().map(|&(j, _)| -x[j]).collect();
        g.extend(self.afv.iter().map(|&i| y[i]));
        Ok(g)
    }

    /// Gradient of the smoothed SCC of this timestep with respect to the controls.
    pub fn gradient(&self, e: &Evaluation) -> Result<Vec<f64>, HydraulicError> {
        let a = scc_smooth_timestep_grad(&e.q, self.solver.net, self.scc);
        self.chain(&e.q, &a, &vec![0.0; self.solver.net.n_nodes()])
    }
}

/// Optimised controls of one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepControl {
    pub eta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub q: Vec<f64>,
    pub h: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub backtracks: usize,
    pub start: usize,
    pub pattern: usize,
    pub directions: Vec<Direction>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Optimised controls for every timestep, indexed `[t][..]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    pub design: ControlDesign,
    pub eta: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    /// Smoothed SCC averaged over timesteps.
    pub f: f64,
    pub timesteps: Vec<TimestepControl>,
}

impl ControlSolution {
    pub fn from_timesteps(design: ControlDesign, timesteps: Vec<TimestepControl>) -> Self {
        let n_t = timesteps.len().max(1) as f64;
        ControlSolution {
            design,
            eta: timesteps.iter().map(|s| s.eta.clone()).collect(),
            alpha: timesteps.iter().map(|s| s.alpha.clone()).collect(),
            q: timesteps.iter().map(|s| s.q.clone()).collect(),
            h: timesteps.iter().map(|s| s.h.clone()).collect(),
            f: timesteps.iter().map(|s| s.f).sum::<f64>() / n_t,
            timesteps,
        }
    }

    pub fn iterations(&self) -> usize {
        self.timesteps.iter().map(|s| s.iterations).sum()
    }

    /// Iteration trace of the chosen runs (`timestep,k,f,beta,mass,energy`).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("timestep,k,f,beta,mass_residual,energy_residual\n");
        for (t, s) in self.timesteps.iter().enumerate() {
            for r in &s.trace {
                let _ = writeln!(
                    out,
                    "{t},{},{:.12e},{:e},{:e},{:e}",
                    r.k, r.f, r.beta, r.mass_residual, r.energy_residual
                );
            }
        }
        out
    }
}
