//! Feasibility restoration: the nearest controls whose simulated state
//! satisfies every bound, found by projected gradient descent on a
//! quadratic penalty with an escalating weight.

use serde::{Deserialize, Serialize};

use super::{ControlError, Direction, Evaluation, TimestepProblem};
use crate::network::NetworkModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestoreOptions {
    pub mu_start: f64,
    pub mu_max: f64,
    pub mu_factor: f64,
    /// Margin (m) kept above minimum heads so the penalty minimiser lands inside.
    pub head_buffer: f64,
    /// Margin (m/s) kept inside velocity and direction limits.
    pub velocity_buffer: f64,
    pub inner_iterations: usize,
}

impl Default for RestoreOptions {
    fn default() -> Self {
        RestoreOptions {
            mu_start: 1e2,
            mu_max: 1e8,
            mu_factor: 10.0,
            head_buffer: 1e-3,
            velocity_buffer: 1e-4,
            inner_iterations: 200,
        }
    }
}

/// Squared-hinge penalty of the buffered bounds and its partial derivatives
/// in `q` and `h`. Flow terms are measured as velocities.
fn penalty(p: &TimestepProblem, e: &Evaluation, o: &RestoreOptions) -> (f64, Vec<f64>, Vec<f64>) {
    let net: &NetworkModel = p.solver.net;
    let (b, t) = (p.bounds, p.t);
    let mut value = 0.0;
    let mut dq = vec![0.0; net.n_links()];
    let mut dh = vec![0.0; net.n_nodes()];
    let mut hinge = |gap: f64, d: &mut f64, dir: f64| {
        if gap > 0.0 {
            value += gap * gap;
            *d += 2.0 * gap * dir;
        }
    };
    let mut sign = vec![0.0; net.n_links()];
    for &(j, dir) in &p.valves {
        sign[j] = match dir {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        };
    }
    for (j, link) in net.links.iter().enumerate() {
        if p.closed[j] {
            continue;
        }
        let a = link.area;
        let u = e.q[j] / a;
        let (ul, uu) = (b.q_lower[t][j] / a, b.q_upper[t][j] / a);
        let buf = if uu - ul > 4.0 * o.velocity_buffer {
            o.velocity_buffer
        } else {
            0.0
        };
        let mut du = 0.0;
        hinge(ul + buf - u, &mut du, -1.0);
        hinge(u - uu + buf, &mut du, 1.0);
        if sign[j] != 0.0 {
            hinge(o.velocity_buffer - sign[j] * u, &mut du, -sign[j]);
        }
        dq[j] = du / a;
    }
    for i in 0..net.n_nodes() {
        let h = e.h[i];
        let mut d = 0.0;
        hinge(b.h_min[t][i] + o.head_buffer - h, &mut d, -1.0);
        hinge(h - b.h_max[t][i], &mut d, 1.0);
        dh[i] = d;
    }
    (value, dq, dh)
}

fn proximity(p: &TimestepProblem, x: &[f64], x0: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; x.len()];
    for k in 0..x.len() {
        let w = p.upper[k] - p.lower[k];
        if w > 0.0 {
            let d = (x[k] - x0[k]) / w;
            value += d * d;
            grad[k] = 2.0 * d / w;
        }
    }
    (value, grad)
}

/// Nearest controls to `x0` (in range-scaled squared distance) whose state
/// lies inside the bounds. A feasible `x0` is returned as is.
pub fn restore_feasibility(p: &TimestepProblem, x0: &[f64], opts: &RestoreOptions) -> Result<Evaluation, ControlError> {
    let mut target = x0.to_vec();
    p.project(&mut target);
    let infeasible = |e: &Evaluation| ControlError::Infeasible {
        violation: e.flow_violation.max(e.head_violation),
    };
    let Ok(mut cur) = p.evaluate(&target) else {
        return Err(ControlError::Infeasible {
            violation: f64::INFINITY,
        });
    };
    if cur.is_feasible() {
        return Ok(cur);
    }
    if p.n_controls() == 0 {
        return Err(infeasible(&cur));
    }
    let widths: Vec<f64> = (0..p.n_controls()).map(|k| p.upper[k] - p.lower[k]).collect();
    let objective = |e: &Evaluation, mu: f64| -> (f64, Vec<f64>, Vec<f64>) {
        let (pv, dq, dh) = penalty(p, e, opts);
        let (xv, xg) = proximity(p, &e.x, &target);
        (xv + mu * pv, xg, [dq, dh].concat())
    };
    let n_p = p.solver.net.n_links();
    let mut mu = opts.mu_start;
    while mu <= opts.mu_max * (1.0 + 1e-12) {
        let (mut f, mut xg, mut dqh) = objective(&cur, mu);
        let mut step = f64::NAN;
        for _ in 0..opts.inner_iterations {
            let Ok(pg) = p.chain(&cur.q, &dqh[..n_p], &dqh[n_p..]) else {
                break;
            };
            let grad: Vec<f64> = xg.iter().zip(&pg).map(|(a, b)| a + mu * b).collect();
            let gmax = grad.iter().zip(&widths).fold(0.0f64, |m, (g, w)| m.max((g * w).abs()));
            if gmax == 0.0 {
                break;
            }
            if step.is_nan() {
                step = 0.1 / gmax;
            }
            let mut moved = false;
            while step * gmax > 1e-12 {
                let mut x: Vec<f64> = (0..grad.len())
                    .map(|k| cur.x[k] - step * widths[k] * widths[k] * grad[k])
                    .collect();
                p.project(&mut x);
                if let Ok(e) = p.evaluate(&x) {
                    let (nf, ng, nd) = objective(&e, mu);
                    if nf < f {
                        let small = f - nf <= 1e-12 * (1.0 + f);
                        cur = e;
                        f = nf;
                        xg = ng;
                        dqh = nd;
                        moved = !small;
                        step *= 2.0;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if cur.is_feasible() {
            return Ok(cur);
        }
        mu *= opts.mu_factor;
    }
    Err(infeasible(&cur))
}
