//! Hazen-Williams head loss and a Newton solver for steady-state flows.
//!
//! For every open link the solver enforces the energy balance
//! `A12 h + A10 h0 + φ(q) + η = 0` and at every junction the mass balance
//! `A12ᵀ q = d + α`. Heads are eliminated through the Schur complement
//! `A12ᵀ G⁻¹ A12`, where `G` is the diagonal of head-loss derivatives.

mod skyline;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{LinkKind, NetworkModel, NodeRef};
use skyline::Skyline;

pub const GRAVITY: f64 = 9.81;
pub const HW_EXPONENT: f64 = 1.852;
pub const VALVE_EXPONENT: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HydraulicError {
    #[error("Newton iteration did not converge after {iterations} iterations (mass {mass:.3e}, energy {energy:.3e})")]
    NonConvergence { iterations: usize, mass: f64, energy: f64 },
    #[error("singular nodal system at junction {node}; closed links may isolate it")]
    SingularSystem { node: String },
    #[error("control vector has wrong length: {0}")]
    Shape(String),
}

/// Resistance and exponent of the head-loss law of every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadLossParams {
    pub r: Vec<f64>,
    pub n_exp: Vec<f64>,
    /// Half-width of the cubic smoothing band around zero flow (m³/s).
    pub q_eps: f64,
}

/// Hazen-Williams resistance of a pipe in SI units.
pub fn hazen_williams_resistance(length: f64, roughness: f64, diameter: f64) -> f64 {
    10.67 * length / (roughness.powf(HW_EXPONENT) * diameter.powf(4.871))
}

/// Resistance of a valve with local loss coefficient `k`.
pub fn valve_resistance(k: f64, diameter: f64) -> f64 {
    8.0 * k / (GRAVITY * std::f64::consts::PI.powi(2) * diameter.powi(4))
}

pub fn headloss_params(net: &NetworkModel) -> HeadLossParams {
    let mut r = Vec::with_capacity(net.n_links());
    let mut n_exp = Vec::with_capacity(net.n_links());
    for link in &net.links {
        match link.kind {
            LinkKind::Pipe => {
                r.push(hazen_williams_resistance(link.length, link.roughness, link.diameter));
                n_exp.push(HW_EXPONENT);
            }
            LinkKind::Valve => {
                r.push(valve_resistance(link.loss_coefficient, link.diameter));
                n_exp.push(VALVE_EXPONENT);
            }
        }
    }
    HeadLossParams { r, n_exp, q_eps: 1e-6 }
}

/// Exact head loss `r |q|^(n-1) q`.
pub fn phi(r: f64, n: f64, q: f64) -> f64 {
    r * q.abs().powf(n - 1.0) * q
}

/// Exact derivative `n r |q|^(n-1)`.
pub fn phi_prime(r: f64, n: f64, q: f64) -> f64 {
    n * r * q.abs().powf(n - 1.0)
}

impl HeadLossParams {
    /// Head loss with the cubic `a q + b q³` inside `|q| ≤ q_eps`, matching
    /// value and slope of the exact law at `±q_eps`.
    pub fn phi(&self, j: usize, q: f64) -> f64 {
        let (r, n, e) = (self.r[j], self.n_exp[j], self.q_eps);
        if q.abs() >= e {
            phi(r, n, q)
        } else {
            let a = r * e.powf(n - 1.0) * (3.0 - n) / 2.0;
            let b = r * (n - 1.0) * e.powf(n - 3.0) / 2.0;
            a * q + b * q * q * q
        }
    }

    pub fn phi_prime(&self, j: usize, q: f64) -> f64 {
        let (r, n, e) = (self.r[j], self.n_exp[j], self.q_eps);
        if q.abs() >= e {
            phi_prime(r, n, q)
        } else {
            let a = r * e.powf(n - 1.0) * (3.0 - n) / 2.0;
            let b = r * (n - 1.0) * e.powf(n - 3.0) / 2.0;
            a + 3.0 * b * q * q
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol_mass: f64,
    pub tol_energy: f64,
    /// Initial velocity in the written link direction (m/s).
    pub init_velocity: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 50,
            tol_mass: 1e-8,
            tol_energy: 1e-6,
            init_velocity: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub iteration: usize,
    pub mass: f64,
    pub energy: f64,
}

/// Solved flows and heads for one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepSolution {
    pub q: Vec<f64>,
    pub h: Vec<f64>,
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<Residual>,
}

/// Flows, heads and controls for every timestep, indexed `[t][j]` or `[t][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicState {
    pub q: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
}

impl HydraulicState {
    pub fn n_timesteps(&self) -> usize {
        self.q.len()
    }

    pub fn from_timesteps(solutions: Vec<TimestepSolution>, eta: Vec<Vec<f64>>, alpha: Vec<Vec<f64>>) -> Self {
        let mut state = HydraulicState {
            q: Vec::new(),
            h: Vec::new(),
            theta: Vec::new(),
            eta,
            alpha,
        };
        for s in solutions {
            state.q.push(s.q);
            state.h.push(s.h);
            state.theta.push(s.theta);
        }
        state
    }
}

/// Newton solver bound to one network. The nodal factorisation profile is
/// computed once and shared by every solve.
#[derive(Debug, Clone)]
pub struct HydraulicSolver<'a> {
    pub net: &'a NetworkModel,
    pub params: HeadLossParams,
    pub opts: SolverOptions,
    sky: Skyline,
}

struct Factored {
    values: Vec<f64>,
    ginv: Vec<f64>,
}

impl<'a> HydraulicSolver<'a> {
    pub fn new(net: &'a NetworkModel) -> Self {
        Self::with_options(net, SolverOptions::default())
    }

    pub fn with_options(net: &'a NetworkModel, opts: SolverOptions) -> Self {
        let edges: Vec<(usize, usize)> = net
            .links
            .iter()
            .filter_map(|l| Some((l.from.demand()?, l.to.demand()?)))
            .collect();
        HydraulicSolver {
            net,
            params: headloss_params(net),
            opts,
            sky: Skyline::new(net.n_nodes(), &edges),
        }
    }

    /// Mass and energy residual norms (∞-norm) of a candidate state.
    pub fn residuals(&self, t: usize, q: &[f64], h: &[f64], eta: &[f64], alpha: &[f64], closed: &[bool]) -> (f64, f64) {
        let net = self.net;
        let mut mass: Vec<f64> = (0..net.n_nodes()).map(|i| -net.demands[t][i] - alpha[i]).collect();
        let mut energy: f64 = 0.0;
        for (j, link) in net.links.iter().enumerate() {
            if let NodeRef::Demand(i) = link.from {
                mass[i] -= q[j];
            }
            if let NodeRef::Demand(i) = link.to {
                mass[i] += q[j];
            }
            if closed.get(j).copied().unwrap_or(false) {
                continue;
            }
            let e = self.head(link.to, t, h) - self.head(link.from, t, h) + self.params.phi(j, q[j]) + eta[j];
            energy = energy.max(e.abs());
        }
        (mass.iter().fold(0.0, |m, v| m.max(v.abs())), energy)
    }

    fn head(&self, node: NodeRef, t: usize, h: &[f64]) -> f64 {
        match node {
            NodeRef::Demand(i) => h[i],
            NodeRef::Source(s) => self.net.source_heads[t][s],
        }
    }

    fn check_lengths(&self, eta: &[f64], alpha: &[f64]) -> Result<(), HydraulicError> {
        if eta.len() != self.net.n_links() || alpha.len() != self.net.n_nodes() {
            return Err(HydraulicError::Shape(format!(
                "expected {} valve losses and {} flush rates, got {} and {}",
                self.net.n_links(),
                self.net.n_nodes(),
                eta.len(),
                alpha.len()
            )));
        }
        Ok(())
    }

    /// Assemble and factor `A12ᵀ G⁻¹ A12` for flows `q`.
    fn factor(&self, q: &[f64], closed: &[bool]) -> Result<Factored, HydraulicError> {
        let mut values = self.sky.zeroed();
        let mut ginv = vec![0.0; q.len()];
        for (j, link) in self.net.links.iter().enumerate() {
            if closed.get(j).copied().unwrap_or(false) {
                continue;
            }
            let g = 1.0 / self.params.phi_prime(j, q[j]).max(1e-8);
            ginv[j] = g;
            let (a, b) = (link.from.demand(), link.to.demand());
            if let Some(a) = a {
                self.sky.add(&mut values, a, a, g);
            }
            if let Some(b) = b {
                self.sky.add(&mut values, b, b, g);
            }
            if let (Some(a), Some(b)) = (a, b) {
                self.sky.add(&mut values, a, b, -g);
            }
        }
        self.sky
            .factor(&mut values)
            .map_err(|k| HydraulicError::SingularSystem {
                node: self.net.nodes[self.sky.original_index(k)].id.clone(),
            })?;
        Ok(Factored { values, ginv })
    }

    /// Solve one timestep for fixed valve losses `eta` and flush rates `alpha`.
    /// Links flagged in `closed` carry no flow and impose no energy balance.
    pub fn solve(
        &self,
        t: usize,
        eta: &[f64],
        alpha: &[f64],
        closed: &[bool],
    ) -> Result<TimestepSolution, HydraulicError> {
        self.check_lengths(eta, alpha)?;
        let net = self.net;
        let (n_p, n_n) = (net.n_links(), net.n_nodes());
        let is_closed = |j: usize| closed.get(j).copied().unwrap_or(false);
        let mut q: Vec<f64> = net
            .links
            .iter()
            .enumerate()
            .map(|(j, l)| {
                if is_closed(j) {
                    0.0
                } else {
                    self.opts.init_velocity * l.area
                }
            })
            .collect();
        let mut h = vec![net.max_source_head(); n_n];
        let mut history = Vec::new();

        let merit = |(m, e): (f64, f64)| (m / self.opts.tol_mass).max(e / self.opts.tol_energy);
        let mut res = self.residuals(t, &q, &h, eta, alpha, closed);
        history.push(Residual {
            iteration: 0,
            mass: res.0,
            energy: res.1,
        });
        for iter in 1..=self.opts.max_iter {
            // Newton step: G dq + A12 dh = -E, A12ᵀ dq = -M.
            let f = self.factor(&q, closed)?;
            let mut energy = vec![0.0; n_p];
            let mut mass: Vec<f64> = (0..n_n).map(|i| -net.demands[t][i] - alpha[i]).collect();
            for (j, link) in net.links.iter().enumerate() {
                if let NodeRef::Demand(i) = link.from {
                    mass[i] -= q[j];
                }
                if let NodeRef::Demand(i) = link.to {
                    mass[i] += q[j];
                }
                if !is_closed(j) {
                    energy[j] =
                        self.head(link.to, t, &h) - self.head(link.from, t, &h) + self.params.phi(j, q[j]) + eta[j];
                }
            }
            // S dh = M - A12ᵀ G⁻¹ E
            let mut rhs = mass.clone();
            for (j, link) in net.links.iter().enumerate() {
                let w = f.ginv[j] * energy[j];
                if let NodeRef::Demand(i) = link.from {
                    rhs[i] += w;
                }
                if let NodeRef::Demand(i) = link.to {
                    rhs[i] -= w;
                }
            }
            let dh = self.sky.solve(&f.values, &rhs);
            let dq: Vec<f64> = net
                .links
                .iter()
                .enumerate()
                .map(|(j, link)| {
                    if is_closed(j) {
                        return 0.0;
                    }
                    let dh_to = link.to.demand().map_or(0.0, |i| dh[i]);
                    let dh_from = link.from.demand().map_or(0.0, |i| dh[i]);
                    -f.ginv[j] * (energy[j] + dh_to - dh_from)
                })
                .collect();

            // Halve the step while the residual grows; if no halving helps,
            // fall back to the full step, which is globally reliable for
            // Hazen-Williams networks.
            let before = merit(res);
            let full = self.trial(t, &q, &h, &dq, &dh, 1.0, eta, alpha, closed);
            let mut chosen = full.clone();
            if merit(full.2) > before {
                let mut step = 0.5;
                while step >= 1.0 / 32.0 {
                    let cand = self.trial(t, &q, &h, &dq, &dh, step, eta, alpha, closed);
                    if merit(cand.2) <= before {
                        chosen = cand;
                        break;
                    }
                    step *= 0.5;
                }
            }
            let (q_new, h_new, trial_res) = chosen;
            res = trial_res;
            q = q_new;
            h = h_new;
            history.push(Residual {
                iteration: iter,
                mass: res.0,
                energy: res.1,
            });
            if res.0 <= self.opts.tol_mass && res.1 <= self.opts.tol_energy {
                let theta = (0..n_p)
                    .map(|j| if is_closed(j) { 0.0 } else { self.params.phi(j, q[j]) })
                    .collect();
                return Ok(TimestepSolution {
                    q,
                    h,
                    theta,
                    iterations: iter,
                    history,
                });
            }
        }
        Err(HydraulicError::NonConvergence {
            iterations: self.opts.max_iter,
            mass: res.0,
            energy: res.1,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn trial(
        &self,
        t: usize,
        q: &[f64],
        h: &[f64],
        dq: &[f64],
        dh: &[f64],
        step: f64,
        eta: &[f64],
        alpha: &[f64],
        closed: &[bool],
    ) -> (Vec<f64>, Vec<f64>, (f64, f64)) {
        let q_new: Vec<f64> = q.iter().zip(dq).map(|(a, b)| a + step * b).collect();
        let h_new: Vec<f64> = h.iter().zip(dh).map(|(a, b)| a + step * b).collect();
        let res = self.residuals(t, &q_new, &h_new, eta, alpha, closed);
        (q_new, h_new, res)
    }

    /// Solve every timestep; timesteps are independent and run in parallel.
    pub fn simulate(&self, eta: &[Vec<f64>], alpha: &[Vec<f64>]) -> Result<HydraulicState, HydraulicError> {
        let n_t = self.net.n_timesteps();
        if eta.len() != n_t || alpha.len() != n_t {
            return Err(HydraulicError::Shape(format!("controls must cover {n_t} timesteps")));
        }
        let solutions = (0..n_t)
            .into_par_iter()
            .map(|t| self.solve(t, &eta[t], &alpha[t], &[]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(HydraulicState::from_timesteps(solutions, eta.to_vec(), alpha.to_vec()))
    }

    /// Uncontrolled state: no valve losses and no flushing.
    pub fn simulate_uncontrolled(&self) -> Result<HydraulicState, HydraulicError> {
        let n_t = self.net.n_timesteps();
        self.simulate(
            &vec![vec![0.0; self.net.n_links()]; n_t],
            &vec![vec![0.0; self.net.n_nodes()]; n_t],
        )
    }

    /// Solve the transposed Newton system at a solved state:
    /// `[G A12; A12ᵀ 0] [x; y] = [a; b]`.
    ///
    /// With `a = ∂f/∂q` and `b = ∂f/∂h`, the sensitivities of `f` are
    /// `∂f/∂η = -x` and `∂f/∂α = y`.
    pub fn adjoint(
        &self,
        q: &[f64],
        a: &[f64],
        b: &[f64],
        closed: &[bool],
    ) -> Result<(Vec<f64>, Vec<f64>), HydraulicError> {
        let f = self.factor(q, closed)?;
        // S y = A12ᵀ G⁻¹ a - b
        let mut rhs: Vec<f64> = b.iter().map(|v| -v).collect();
        for (j, link) in self.net.links.iter().enumerate() {
            let w = f.ginv[j] * a[j];
            if let NodeRef::Demand(i) = link.from {
                rhs[i] -= w;
            }
            if let NodeRef::Demand(i) = link.to {
                rhs[i] += w;
            }
        }
        let y = self.sky.solve(&f.values, &rhs);
        let x = self
            .net
            .links
            .iter()
            .enumerate()
            .map(|(j, link)| {
                let a12y = link.to.demand().map_or(0.0, |i| y[i]) - link.from.demand().map_or(0.0, |i| y[i]);
                f.ginv[j] * (a[j] - a12y)
            })
            .collect();
        Ok((x, y))
    }
}

/// Convenience wrapper around [`HydraulicSolver::solve`].
pub fn solve_steady(
    net: &NetworkModel,
    t: usize,
    eta: &[f64],
    alpha: &[f64],
    closed: &[bool],
) -> Result<TimestepSolution, HydraulicError> {
    HydraulicSolver::new(net).solve(t, eta, alpha, closed)
}

/// Residual history as CSV (`iteration,mass,energy`).
pub fn residual_csv(history: &[Residual]) -> String {
    let mut out = String::from("iteration,mass,energy\n");
    for r in history {
        let _ = writeln!(out, "{},{:e},{:e}", r.iteration, r.mass, r.energy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::forest_core;

    fn controls(net: &NetworkModel) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; net.n_links()], vec![0.0; net.n_nodes()])
    }

    #[test]
    fn resistance_of_reference_pipe() {
        let r = hazen_williams_resistance(1000.0, 130.0, 0.3);
        let oracle = 10.67 * 1000.0 / (130f64.powf(1.852) * 0.3f64.powf(4.871));
        assert!((r - oracle).abs() < 1e-12 * oracle);
        assert!((r - 456.6).abs() < 1.0, "{r}");
        let ratio = hazen_williams_resistance(1000.0, 260.0, 0.3) / r;
        assert!((ratio - 2f64.powf(-1.852)).abs() < 1e-12);
        assert_eq!(valve_resistance(0.0, 0.2), 0.0);
    }

    #[test]
    fn head_loss_values() {
        let r = hazen_williams_resistance(1000.0, 130.0, 0.3);
        let v = phi(r, HW_EXPONENT, 0.05);
        assert!((v - r * 0.05f64.powf(1.852)).abs() < 1e-12);
        assert!((v - 1.78).abs() < 0.01, "{v}");
        assert_eq!(phi(r, HW_EXPONENT, 0.0), 0.0);
    }

    #[test]
    fn smoothing_is_continuous_at_band_edges() {
        let net = fixtures::single_pipe();
        let p = headloss_params(&net);
        let e = p.q_eps;
        for q in [e, -e] {
            let inside = q * (1.0 - 1e-12);
            assert!((p.phi(0, inside) - phi(p.r[0], p.n_exp[0], q)).abs() < 1e-12);
            assert!((p.phi_prime(0, inside) - phi_prime(p.r[0], p.n_exp[0], q)).abs() < 1e-6 * p.phi_prime(0, q));
        }
        assert_eq!(p.phi(0, 0.0), 0.0);
        assert!(p.phi_prime(0, 0.0) > 0.0);
    }

    #[test]
    fn single_pipe_solution() {
        let net = fixtures::single_pipe();
        let (eta, alpha) = controls(&net);
        let sol = solve_steady(&net, 0, &eta, &alpha, &[]).unwrap();
        assert!((sol.q[0] - 0.005).abs() < 1e-10);
        let r = hazen_williams_resistance(1000.0, 130.0, 0.3);
        assert!((sol.h[0] - (50.0 - phi(r, HW_EXPONENT, 0.005))).abs() < 1e-6);
    }

    #[test]
    fn flushing_adds_to_pipe_flow() {
        let net = fixtures::single_pipe();
        let sol = solve_steady(&net, 0, &[0.0], &[0.025], &[]).unwrap();
        assert!((sol.q[0] - 0.030).abs() < 1e-10);
        let u = sol.q[0] / net.links[0].area;
        assert!((u - 0.4244).abs() < 1e-3);
    }

    #[test]
    fn parallel_pipes_split_evenly() {
        let net = fixtures::parallel_pipes(0.02);
        let (eta, alpha) = controls(&net);
        let sol = solve_steady(&net, 0, &eta, &alpha, &[]).unwrap();
        assert!((sol.q[0] - 0.01).abs() < 1e-9);
        assert!((sol.q[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn closing_a_parallel_pipe_diverts_flow() {
        let net = fixtures::parallel_pipes(0.02);
        let (eta, alpha) = controls(&net);
        let sol = solve_steady(&net, 0, &eta, &alpha, &[true, false]).unwrap();
        assert_eq!(sol.q[0], 0.0);
        assert!((sol.q[1] - 0.02).abs() < 1e-10);
    }

    #[test]
    fn isolating_a_node_is_singular() {
        let net = fixtures::single_pipe();
        let err = solve_steady(&net, 0, &[0.0], &[0.0], &[true]).unwrap_err();
        assert!(matches!(err, HydraulicError::SingularSystem { .. }));
    }

    #[test]
    fn valve_loss_lowers_downstream_head() {
        let net = fixtures::prv_loop();
        let solver = HydraulicSolver::new(&net);
        let (mut eta, alpha) = controls(&net);
        let open = solver.solve(0, &eta, &alpha, &[]).unwrap();
        eta[net.link_index()["V1"]] = 5.0;
        let throttled = solver.solve(0, &eta, &alpha, &[]).unwrap();
        let pa = net.link_index()["PA"];
        assert!(throttled.q[pa] > open.q[pa]);
    }

    #[test]
    fn forest_flows_match_downstream_demand() {
        let net = fixtures::triangle_with_pendant();
        let d = forest_core(&net);
        let alpha = vec![0.0, 0.0, 0.01];
        let sol = solve_steady(&net, 0, &vec![0.0; net.n_links()], &alpha, &[]).unwrap();
        let out: Vec<f64> = net.demands[0].iter().zip(&alpha).map(|(a, b)| a + b).collect();
        for f in &d.forest {
            assert!((sol.q[f.link] - f.flow(&out)).abs() < 1e-10);
        }
    }

    #[test]
    fn random_networks_meet_residual_tolerances() {
        for seed in 0..20 {
            let net = fixtures::random_network(seed, 10 + seed as usize * 2, 2);
            let solver = HydraulicSolver::new(&net);
            let state = solver.simulate_uncontrolled().unwrap();
            for t in 0..net.n_timesteps() {
                let (m, e) = solver.residuals(t, &state.q[t], &state.h[t], &state.eta[t], &state.alpha[t], &[]);
                assert!(m <= 1e-8 && e <= 1e-6, "seed {seed}: {m} {e}");
            }
        }
    }

    #[test]
    fn head_loss_grows_with_demand() {
        let mut last = 0.0;
        for k in 1..10 {
            let mut b = crate::network::NetworkBuilder::new(1);
            b.source("R", 50.0)
                .junction("J", 0.0, 0.002 * k as f64)
                .pipe("P", "R", "J", 500.0, 0.2, 120.0);
            let net = b.build().unwrap();
            let sol = solve_steady(&net, 0, &[0.0], &[0.0], &[]).unwrap();
            let loss = 50.0 - sol.h[0];
            assert!(loss > last);
            last = loss;
        }
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let net = fixtures::triangle_with_pendant();
        let opts = SolverOptions {
            tol_mass: 1e-14,
            tol_energy: 1e-11,
            ..SolverOptions::default()
        };
        let solver = HydraulicSolver::with_options(&net, opts);
        let eta = vec![0.0, 0.3, 0.0, 0.0];
        let alpha = vec![0.001, 0.0, 0.0];
        let sol = solver.solve(0, &eta, &alpha, &[]).unwrap();
        // f = q_1 + 2 h_2
        let a = vec![0.0, 1.0, 0.0, 0.0];
        let b = vec![0.0, 0.0, 2.0];
        let (x, y) = solver.adjoint(&sol.q, &a, &b, &[]).unwrap();
        let f = |eta: &[f64], alpha: &[f64]| {
            let s = solver.solve(0, eta, alpha, &[]).unwrap();
            s.q[1] + 2.0 * s.h[2]
        };
        let step = 1e-5;
        let mut e2 = eta.clone();
        e2[1] += step;
        let mut e1 = eta.clone();
        e1[1] -= step;
        let fd_eta = (f(&e2, &alpha) - f(&e1, &alpha)) / (2.0 * step);
        assert!(
            (fd_eta + x[1]).abs() < 1e-6 * fd_eta.abs().max(1.0),
            "{fd_eta} vs {}",
            -x[1]
        );
        let step = 1e-6;
        let mut a2 = alpha.clone();
        a2[0] += step;
        let mut a1 = alpha.clone();
        a1[0] -= step;
        let fd_alpha = (f(&eta, &a2) - f(&eta, &a1)) / (2.0 * step);
        assert!(
            (fd_alpha - y[0]).abs() < 1e-5 * fd_alpha.abs().max(1.0),
            "{fd_alpha} vs {}",
            y[0]
        );
    }
}
