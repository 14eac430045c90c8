//! Sequential linear programming that keeps every iterate hydraulically feasible.
//!
//! At the current point the objective and the conservation laws are
//! linearised; an LP over `(dq, dh, dx)` inside the variable bounds and a
//! trust box gives a step, which is halved until the simulated state is
//! feasible and the objective has not decreased.

use serde::{Deserialize, Serialize};

use super::{ControlError, Evaluation, TimestepProblem};
use crate::lp::{LinearProgram, LpSolver, Sense, SimplexSolver};
use crate::network::NodeRef;
use crate::objective::scc_smooth_timestep_grad;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfscpOptions {
    /// Stop once an accepted step improves the objective by less than this fraction.
    pub eps_tol: f64,
    pub k_max: usize,
    /// Step limit per iteration as a fraction of each control's range.
    pub trust: f64,
    pub min_beta: f64,
}

impl Default for SfscpOptions {
    fn default() -> Self {
        SfscpOptions {
            eps_tol: 1e-4,
            k_max: 50,
            trust: 0.25,
            min_beta: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub beta: f64,
    pub mass_residual: f64,
    pub energy_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfscpResult {
    pub best: Evaluation,
    pub iterations: usize,
    pub backtracks: usize,
    /// Objective of the start and of every accepted iterate.
    pub history: Vec<f64>,
    /// Every accepted iterate, starting with the start point.
    pub iterates: Vec<Evaluation>,
    pub trace: Vec<TraceRow>,
    /// The line search ran out of step length before finding an acceptable point.
    pub stalled: bool,
}

/// Linearised step problem at `e`. Returns the control step and the
/// predicted first-order objective change.
fn step_lp(p: &TimestepProblem, e: &Evaluation, trust: f64) -> Option<(Vec<f64>, f64)> {
    let net = p.solver.net;
    let (n_p, n_n, t) = (net.n_links(), net.n_nodes(), p.t);
    let b = p.bounds;
    let g = scc_smooth_timestep_grad(&e.q, net, p.scc);
    let mut lp = LinearProgram::new();
    let mut dq_lo = vec![0.0; n_p];
    let mut dq_hi = vec![0.0; n_p];
    for j in 0..n_p {
        if p.closed[j] {
            continue;
        }
        dq_lo[j] = (b.q_lower[t][j] - e.q[j]).min(0.0);
        dq_hi[j] = (b.q_upper[t][j] - e.q[j]).max(0.0);
    }
    for &(j, dir) in &p.valves {
        match dir {
            super::Direction::Forward => dq_lo[j] = dq_lo[j].max((-e.q[j]).min(0.0)),
            super::Direction::Reverse => dq_hi[j] = dq_hi[j].min((-e.q[j]).max(0.0)),
        }
    }
    for j in 0..n_p {
        lp.add_col(format!("dq{j}"), dq_lo[j], dq_hi[j], -g[j]);
    }
    for i in 0..n_n {
        lp.add_col(
            format!("dh{i}"),
            (b.h_min[t][i] - e.h[i]).min(0.0),
            (b.h_max[t][i] - e.h[i]).max(0.0),
            0.0,
        );
    }
    let nx = p.n_controls();
    for k in 0..nx {
        let w = p.upper[k] - p.lower[k];
        let lo = (p.lower[k] - e.x[k]).max(-trust * w).min(0.0);
        let hi = (p.upper[k] - e.x[k]).min(trust * w).max(0.0);
        lp.add_col(format!("dx{k}"), lo, hi, 0.0);
    }
    let dx = |k: usize| n_p + n_n + k;
    let mut valve_of = vec![None; n_p];
    for (k, &(j, _)) in p.valves.iter().enumerate() {
        valve_of[j] = Some(k);
    }
    let mut mass: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_n];
    for (m, &i) in p.afv.iter().enumerate() {
        mass[i].push((dx(p.valves.len() + m), -1.0));
    }
    for (j, link) in net.links.iter().enumerate() {
        if let NodeRef::Demand(i) = link.from {
            mass[i].push((j, -1.0));
        }
        if let NodeRef::Demand(i) = link.to {
            mass[i].push((j, 1.0));
        }
        if p.closed[j] {
            continue;
        }
        let mut row = vec![(j, p.solver.params.phi_prime(j, e.q[j]))];
        if let NodeRef::Demand(i) = link.to {
            row.push((n_p + i, 1.0));
        }
        if let NodeRef::Demand(i) = link.from {
            row.push((n_p + i, -1.0));
        }
        if let Some(k) = valve_of[j] {
            row.push((dx(k), 1.0));
        }
        lp.add_row(format!("e{j}"), row, Sense::Eq, 0.0);
    }
    for (i, row) in mass.into_iter().enumerate() {
        lp.add_row(format!("m{i}"), row, Sense::Eq, 0.0);
    }
    let sol = SimplexSolver::default().solve(&lp, None);
    if !sol.is_optimal() {
        log::debug!("step LP ended {:?}", sol.status);
        return None;
    }
    let step = (0..nx).map(|k| sol.x[dx(k)]).collect();
    Some((step, -sol.objective))
}

/// Improve a feasible start. Every accepted iterate is feasible and no
/// worse than the one before.
pub fn sfscp_solve(p: &TimestepProblem, x0: &[f64], opts: &SfscpOptions) -> Result<SfscpResult, ControlError> {
    let start = p.evaluate(x0)?;
    if !start.is_feasible() {
        return Err(ControlError::InfeasibleStart {
            violation: start.flow_violation.max(start.head_violation),
        });
    }
    let mut res = SfscpResult {
        history: vec![start.f],
        iterates: vec![start.clone()],
        trace: vec![TraceRow {
            k: 0,
            f: start.f,
            beta: 0.0,
            mass_residual: start.mass_residual,
            energy_residual: start.energy_residual,
        }],
        best: start,
        iterations: 0,
        backtracks: 0,
        stalled: false,
    };
    if p.n_controls() == 0 {
        return Ok(res);
    }
    while res.iterations < opts.k_max {
        res.iterations += 1;
        let cur = &res.best;
        let Some((step, predicted)) = step_lp(p, cur, opts.trust) else {
            break;
        };
        let scale = step.iter().enumerate().fold(0.0f64, |m, (k, d)| {
            m.max(d.abs() / (p.upper[k] - p.lower[k]).max(f64::MIN_POSITIVE))
        });
        if scale <= 1e-12 || predicted <= 1e-15 {
            break;
        }
        let mut beta = 1.0;
        let mut accepted = None;
        while beta >= opts.min_beta {
            let mut x: Vec<f64> = cur.x.iter().zip(&step).map(|(x, d)| x + beta * d).collect();
            p.project(&mut x);
            match p.evaluate(&x) {
                Ok(e) if e.is_feasible() && e.f >= cur.f => {
                    accepted = Some(e);
                    break;
                }
                _ => {
                    res.backtracks += 1;
                    beta *= 0.5;
                }
            }
        }
        let Some(next) = accepted else {
            res.stalled = true;
            break;
        };
        let gain = (next.f - cur.f) / cur.f.abs().max(1e-12);
        res.trace.push(TraceRow {
            k: res.iterations,
            f: next.f,
            beta,
            mass_residual: next.mass_residual,
            energy_residual: next.energy_residual,
        });
        res.history.push(next.f);
        res.iterates.push(next.clone());
        res.best = next;
        if gain < opts.eps_tol {
            break;
        }
    }
    Ok(res)
}
