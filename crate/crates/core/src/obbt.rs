//! Optimization-based bound tightening of core-link flows.
//!
//! Each iteration minimises and maximises every core flow over the current
//! relaxation, then rebuilds the envelopes on the narrower domains. Forest
//! flows are left alone since demand already pins them down.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpSolution, LpSolver, LpStatus};
use crate::network::{ForestCoreDecomposition, NetworkModel};
use crate::objective::SccParams;
use crate::relaxation::{build_lp, BoundSet, DesignConfig, RelaxError};

/// Relative slack left beyond each LP optimum so solver tolerance never
/// cuts off a feasible flow.
const MARGIN: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObbtError {
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error("bound LP for link {link} at timestep {t} ended {status:?}; the starting bounds are inconsistent")]
    Lp { link: String, t: usize, status: LpStatus },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbtOptions {
    pub k_max: usize,
    /// Stop once an iteration shrinks the diameter by less than this ratio.
    pub eps_tol: f64,
}

impl Default for ObbtOptions {
    fn default() -> Self {
        ObbtOptions { k_max: 3, eps_tol: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObbtReport {
    pub iterations: usize,
    /// Core flow-domain diameter before the first and after every iteration.
    pub diam: Vec<f64>,
    /// LP solves per iteration.
    pub lp_solves: Vec<usize>,
    pub core_links: usize,
    pub wall_time_s: f64,
}

impl ObbtReport {
    pub fn total_lp_solves(&self) -> usize {
        self.lp_solves.iter().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn with_objective(lp: &LinearProgram, col: usize, sign: f64) -> LinearProgram {
    let mut out = lp.clone();
    out.objective.iter_mut().for_each(|c| *c = 0.0);
    out.objective[col] = sign;
    out
}

/// Tighten `[q_L, q_U]` on core links. Returns the new bounds and a report.
pub fn tighten(
    net: &NetworkModel,
    scc: &SccParams,
    bounds: &BoundSet,
    design: &DesignConfig,
    decomposition: &ForestCoreDecomposition,
    opts: &ObbtOptions,
    solver: &dyn LpSolver,
) -> Result<(BoundSet, ObbtReport), ObbtError> {
    let start = Instant::now();
    let core = &decomposition.core_links;
    let mut current = bounds.clone();
    let mut report = ObbtReport {
        iterations: 0,
        diam: vec![current.diameter(core)],
        lp_solves: Vec::new(),
        core_links: core.len(),
        wall_time_s: 0.0,
    };
    if core.is_empty() {
        report.wall_time_s = start.elapsed().as_secs_f64();
        return Ok((current, report));
    }
    let n_t = net.n_timesteps();
    let tasks: Vec<(usize, usize)> = (0..n_t).flat_map(|t| core.iter().map(move |&j| (t, j))).collect();
    let mut ratio = 0.0;
    while ratio <= opts.eps_tol && report.iterations < opts.k_max {
        let relax = build_lp(net, scc, &current, design)?;
        let results: Vec<Result<(f64, f64), ObbtError>> = tasks
            .par_iter()
            .map(|&(t, j)| {
                let col = relax.map.q(t, j);
                let fail = |s: &LpSolution| ObbtError::Lp {
                    link: net.links[j].id.clone(),
                    t,
                    status: s.status,
                };
                let lo = solver.solve(&with_objective(&relax.lp, col, 1.0), None);
                if !lo.is_optimal() {
                    return Err(fail(&lo));
                }
                let hi = solver.solve(&with_objective(&relax.lp, col, -1.0), lo.basis.as_ref());
                if !hi.is_optimal() {
                    return Err(fail(&hi));
                }
                Ok((lo.x[col], hi.x[col]))
            })
            .collect();
        let mut next = current.clone();
        for (&(t, j), res) in tasks.iter().zip(results) {
            let (lo, hi) = res?;
            let (old_lo, old_hi) = (current.q_lower[t][j], current.q_upper[t][j]);
            let pad = MARGIN * (1.0 + (old_hi - old_lo));
            let new_lo = (lo - pad).max(old_lo);
            let new_hi = (hi + pad).min(old_hi);
            if new_lo <= new_hi {
                next.q_lower[t][j] = new_lo;
                next.q_upper[t][j] = new_hi;
            }
        }
        report.lp_solves.push(2 * tasks.len());
        report.iterations += 1;
        let before = *report.diam.last().expect("seeded with the initial diameter");
        let after = next.diameter(core);
        report.diam.push(after);
        ratio = if before > 0.0 { after / before } else { 1.0 };
        log::info!(
            "bound tightening iteration {}: diameter {before:.4e} -> {after:.4e}",
            report.iterations
        );
        current = next;
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((current, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::forest_core;
    use crate::hydraulics::HydraulicSolver;
    use crate::lp::SimplexSolver;
    use crate::relaxation::{initial_bounds, BoundOptions};

    fn run(net: &NetworkModel, n_v: usize, n_f: usize) -> (BoundSet, BoundSet, ObbtReport) {
        let d = forest_core(net);
        let b0 = initial_bounds(net, &BoundOptions::default(), Some(&d), n_f);
        let scc = SccParams::new(net, 50.0, 0.2);
        let design = DesignConfig::from_network(net, n_v, n_f);
        let (b1, rep) = tighten(
            net,
            &scc,
            &b0,
            &design,
            &d,
            &ObbtOptions::default(),
            &SimplexSolver::default(),
        )
        .unwrap();
        (b0, b1, rep)
    }

    #[test]
    fn tree_is_left_alone() {
        let net = fixtures::single_pipe();
        let (b0, b1, rep) = run(&net, 0, 1);
        assert_eq!(b0, b1);
        assert_eq!(rep.total_lp_solves(), 0);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn single_loop_keeps_the_uncontrolled_flow() {
        let net = fixtures::single_loop();
        let (b0, b1, rep) = run(&net, 0, 0);
        let st = HydraulicSolver::new(&net).simulate_uncontrolled().unwrap();
        for j in 0..net.n_links() {
            assert!(b1.q_lower[0][j] <= st.q[0][j] && st.q[0][j] <= b1.q_upper[0][j]);
            assert!(b1.q_lower[0][j] >= b0.q_lower[0][j] && b1.q_upper[0][j] <= b0.q_upper[0][j]);
        }
        for &s in &rep.lp_solves {
            assert_eq!(s, 2 * net.n_timesteps() * 3);
        }
        assert!(rep.diam.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.diam.last().unwrap() < &rep.diam[0]);
    }
}
