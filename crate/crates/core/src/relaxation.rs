//! Polyhedral relaxation of the valve placement problem as a linear program.
//!
//! Binary placement and direction variables are relaxed to `[0, 1]`, the
//! sigmoid objective terms are replaced by auxiliary variables `σ` under
//! concave overestimators, and the head loss by `θ` between the polyhedral
//! envelopes of the head-loss curve.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelopes::{hw_envelope, sigmoid_minus_envelope, sigmoid_plus_envelope, LinearCut};
use crate::hydraulics::{headloss_params, phi, HeadLossParams};
use crate::lp::{LinearProgram, LpSolution, LpStatus, Sense};
use crate::network::{ForestCoreDecomposition, LinkKind, NetworkModel, NodeRef};
use crate::objective::SccParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxError {
    #[error("inconsistent bounds on {name}: {lower} > {upper}")]
    InconsistentBounds { name: String, lower: f64, upper: f64 },
    #[error("{requested} {what} requested but only {available} candidates exist")]
    TooManyValves {
        what: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("relaxation is not optimal: {0:?}")]
    NotOptimal(LpStatus),
}

/// Physical limits used to bound the continuous variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    /// Velocity cap (m/s) applied to every link without an override.
    pub u_max: f64,
    #[serde(default)]
    pub u_max_links: BTreeMap<String, f64>,
    /// Minimum pressure head (m) at nodes with demand.
    pub p_min: f64,
    /// Largest flushing rate of one valve (m³/s).
    pub alpha_upper: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            u_max: 3.0,
            u_max_links: BTreeMap::new(),
            p_min: 15.0,
            alpha_upper: 0.025,
        }
    }
}

/// Variable domains, indexed `[t][link]` or `[t][node]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub q_lower: Vec<Vec<f64>>,
    pub q_upper: Vec<Vec<f64>>,
    pub h_min: Vec<Vec<f64>>,
    pub h_max: Vec<Vec<f64>>,
    pub eta_lower: Vec<Vec<f64>>,
    pub eta_upper: Vec<Vec<f64>>,
    pub alpha_upper: f64,
}

impl BoundSet {
    pub fn n_timesteps(&self) -> usize {
        self.q_lower.len()
    }

    /// `θ` bounds follow from the flow bounds since `φ` is increasing.
    pub fn theta(&self, params: &HeadLossParams, t: usize, j: usize) -> (f64, f64) {
        let (r, n) = (params.r[j], params.n_exp[j]);
        (phi(r, n, self.q_lower[t][j]), phi(r, n, self.q_upper[t][j]))
    }

    /// Largest flow-domain width over the given links and all timesteps.
    pub fn diameter(&self, links: &[usize]) -> f64 {
        let mut d: f64 = 0.0;
        for t in 0..self.n_timesteps() {
            for &j in links {
                d = d.max(self.q_upper[t][j] - self.q_lower[t][j]);
            }
        }
        d
    }

    /// Largest amount by which a simulated timestep leaves the flow, head or
    /// flushing bounds. Zero means the state is inside.
    pub fn state_violation(&self, t: usize, q: &[f64], h: &[f64], alpha: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (j, &qj) in q.iter().enumerate() {
            v = v.max(self.q_lower[t][j] - qj).max(qj - self.q_upper[t][j]);
        }
        for (i, &hi) in h.iter().enumerate() {
            v = v.max(self.h_min[t][i] - hi).max(hi - self.h_max[t][i]);
        }
        for &a in alpha {
            v = v.max(-a).max(a - self.alpha_upper);
        }
        v
    }

    pub fn check(&self) -> Result<(), RelaxError> {
        let pairs = [
            ("q", &self.q_lower, &self.q_upper),
            ("h", &self.h_min, &self.h_max),
            ("eta", &self.eta_lower, &self.eta_upper),
        ];
        for (name, lo, hi) in pairs {
            for (t, (l, u)) in lo.iter().zip(hi.iter()).enumerate() {
                for (k, (&a, &b)) in l.iter().zip(u).enumerate() {
                    if a > b || a.is_nan() || b.is_nan() {
                        return Err(RelaxError::InconsistentBounds {
                            name: format!("{name}[{t}][{k}]"),
                            lower: a,
                            upper: b,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Node head bounds: elevation plus minimum pressure where there is demand,
/// and the highest source head everywhere.
fn head_bounds(net: &NetworkModel, opts: &BoundOptions) -> (Vec<f64>, Vec<f64>) {
    let h_max = net.max_source_head();
    let lo = net
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            if net.has_demand(i) {
                n.elevation + opts.p_min
            } else {
                n.elevation
            }
        })
        .collect();
    (lo, vec![h_max; net.n_nodes()])
}

/// Bounds before any tightening. Forest links, when a decomposition is
/// given, take the interval implied by downstream demand plus at most
/// `n_f` flushing valves.
pub fn initial_bounds(
    net: &NetworkModel,
    opts: &BoundOptions,
    decomposition: Option<&ForestCoreDecomposition>,
    n_f: usize,
) -> BoundSet {
    let n_t = net.n_timesteps();
    let (h_lo, h_hi) = head_bounds(net, opts);
    let mut b = BoundSet {
        q_lower: Vec::with_capacity(n_t),
        q_upper: Vec::with_capacity(n_t),
        h_min: vec![h_lo; n_t],
        h_max: vec![h_hi; n_t],
        eta_lower: Vec::with_capacity(n_t),
        eta_upper: Vec::with_capacity(n_t),
        alpha_upper: opts.alpha_upper,
    };
    let cap: Vec<f64> = net
        .links
        .iter()
        .map(|l| l.area * opts.u_max_links.get(&l.id).copied().unwrap_or(opts.u_max))
        .collect();
    for t in 0..n_t {
        let mut ql: Vec<f64> = cap.iter().map(|c| -c).collect();
        let mut qu = cap.clone();
        if let Some(d) = decomposition {
            for f in &d.forest {
                let demand: f64 = f.downstream.iter().map(|&i| net.demands[t][i]).sum();
                let flushers = f.downstream.len().min(n_f) as f64;
                let extra = flushers * opts.alpha_upper;
                let (lo, hi) = if f.sign > 0.0 {
                    (demand, demand + extra)
                } else {
                    (-demand - extra, -demand)
                };
                let j = f.link;
                if lo.max(ql[j]) <= hi.min(qu[j]) {
                    ql[j] = lo.max(ql[j]);
                    qu[j] = hi.min(qu[j]);
                } else {
                    log::warn!("link {}: demand-implied flow exceeds the velocity cap", net.links[j].id);
                    ql[j] = lo;
                    qu[j] = hi;
                }
            }
        }
        let head_lo = |node: NodeRef| {
            net.known_head(node, t)
                .unwrap_or_else(|| b.h_min[t][node.demand().unwrap()])
        };
        let head_hi = |node: NodeRef| {
            net.known_head(node, t)
                .unwrap_or_else(|| b.h_max[t][node.demand().unwrap()])
        };
        let mut el = Vec::with_capacity(net.n_links());
        let mut eu = Vec::with_capacity(net.n_links());
        for link in &net.links {
            el.push((head_lo(link.from) - head_hi(link.to)).min(0.0));
            eu.push((head_hi(link.from) - head_lo(link.to)).max(0.0));
        }
        b.q_lower.push(ql);
        b.q_upper.push(qu);
        b.eta_lower.push(el);
        b.eta_upper.push(eu);
    }
    b
}

/// Which valves exist and which may be added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub n_v: usize,
    pub n_f: usize,
    pub prv_links: Vec<usize>,
    pub dbv_links: Vec<usize>,
    pub dbv_candidates: Vec<usize>,
    pub afv_candidates: Vec<usize>,
}

impl DesignConfig {
    /// Every pipe that is not already a control valve may host a new valve;
    /// every node with demand may host a flushing valve.
    pub fn from_network(net: &NetworkModel, n_v: usize, n_f: usize) -> Self {
        let prv_links = (0..net.n_links()).filter(|&j| net.links[j].is_existing_prv).collect();
        let dbv_links = (0..net.n_links()).filter(|&j| net.links[j].is_existing_dbv).collect();
        let dbv_candidates = (0..net.n_links())
            .filter(|&j| net.links[j].kind == LinkKind::Pipe && !net.links[j].is_existing_control())
            .collect();
        let afv_candidates = (0..net.n_nodes()).filter(|&i| net.has_demand(i)).collect();
        DesignConfig {
            n_v,
            n_f,
            prv_links,
            dbv_links,
            dbv_candidates,
            afv_candidates,
        }
    }

    pub fn check(&self) -> Result<(), RelaxError> {
        if self.n_v > self.dbv_candidates.len() {
            return Err(RelaxError::TooManyValves {
                what: "control valves",
                requested: self.n_v,
                available: self.dbv_candidates.len(),
            });
        }
        if self.n_f > self.afv_candidates.len() {
            return Err(RelaxError::TooManyValves {
                what: "flushing valves",
                requested: self.n_f,
                available: self.afv_candidates.len(),
            });
        }
        Ok(())
    }
}

/// Column layout of the relaxation: one block per timestep, then `z`, `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMap {
    pub n_p: usize,
    pub n_n: usize,
    pub n_t: usize,
}

/// Column counts by role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableCounts {
    pub continuous: usize,
    pub sigma: usize,
    pub relaxed_binary: usize,
    pub nonconvex: usize,
    pub total: usize,
}

impl VariableMap {
    pub fn new(n_p: usize, n_n: usize, n_t: usize) -> Self {
        VariableMap { n_p, n_n, n_t }
    }

    fn block(&self) -> usize {
        7 * self.n_p + 2 * self.n_n
    }

    pub fn q(&self, t: usize, j: usize) -> usize {
        t * self.block() + j
    }
    pub fn h(&self, t: usize, i: usize) -> usize {
        t * self.block() + self.n_p + i
    }
    pub fn eta(&self, t: usize, j: usize) -> usize {
        t * self.block() + self.n_p + self.n_n + j
    }
    pub fn theta(&self, t: usize, j: usize) -> usize {
        t * self.block() + 2 * self.n_p + self.n_n + j
    }
    pub fn alpha(&self, t: usize, i: usize) -> usize {
        t * self.block() + 3 * self.n_p + self.n_n + i
    }
    pub fn sigma_plus(&self, t: usize, j: usize) -> usize {
        t * self.block() + 3 * self.n_p + 2 * self.n_n + j
    }
    pub fn sigma_minus(&self, t: usize, j: usize) -> usize {
        t * self.block() + 4 * self.n_p + 2 * self.n_n + j
    }
    pub fn v_plus(&self, t: usize, j: usize) -> usize {
        t * self.block() + 5 * self.n_p + 2 * self.n_n + j
    }
    pub fn v_minus(&self, t: usize, j: usize) -> usize {
        t * self.block() + 6 * self.n_p + 2 * self.n_n + j
    }
    pub fn z(&self, j: usize) -> usize {
        self.n_t * self.block() + j
    }
    pub fn y(&self, i: usize) -> usize {
        self.n_t * self.block() + self.n_p + i
    }

    pub fn total(&self) -> usize {
        self.n_t * self.block() + self.n_p + self.n_n
    }

    pub fn counts(&self) -> VariableCounts {
        let (p, n, t) = (self.n_p, self.n_n, self.n_t);
        VariableCounts {
            continuous: t * (3 * p + 2 * n),
            sigma: 2 * p * t,
            relaxed_binary: 2 * p * t + p + n,
            nonconvex: 2 * p * t,
            total: self.total(),
        }
    }
}

/// Assembled relaxation plus enough bookkeeping to read solutions back.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub lp: LinearProgram,
    pub map: VariableMap,
    pub n_hw_cuts: usize,
    pub n_sigmoid_cuts: usize,
}

fn push_cut(lp: &mut LinearProgram, name: String, q: usize, aux: usize, cut: LinearCut) {
    let mut coeffs = Vec::with_capacity(2);
    if cut.coeff_q != 0.0 {
        coeffs.push((q, cut.coeff_q));
    }
    coeffs.push((aux, cut.coeff_aux));
    lp.add_row(name, coeffs, Sense::Le, cut.rhs);
}

/// Build the linear relaxation for the given bounds and design.
pub fn build_lp(
    net: &NetworkModel,
    scc: &SccParams,
    bounds: &BoundSet,
    design: &DesignConfig,
) -> Result<Relaxation, RelaxError> {
    bounds.check()?;
    design.check()?;
    let params = headloss_params(net);
    let (n_p, n_n, n_t) = (net.n_links(), net.n_nodes(), net.n_timesteps());
    let map = VariableMap::new(n_p, n_n, n_t);
    let mut lp = LinearProgram::new();

    let mut fixed_z = vec![Some(0.0); n_p];
    for &j in &design.dbv_candidates {
        fixed_z[j] = None;
    }
    for &j in design.prv_links.iter().chain(&design.dbv_links) {
        fixed_z[j] = Some(1.0);
    }
    let mut y_free = vec![false; n_n];
    for &i in &design.afv_candidates {
        y_free[i] = true;
    }
    let is_prv = |j: usize| design.prv_links.contains(&j);

    for t in 0..n_t {
        let lid = |j: usize| &net.links[j].id;
        let nid = |i: usize| &net.nodes[i].id;
        for j in 0..n_p {
            lp.add_col(
                format!("q_{t}_{}", lid(j)),
                bounds.q_lower[t][j],
                bounds.q_upper[t][j],
                0.0,
            );
        }
        for i in 0..n_n {
            lp.add_col(format!("h_{t}_{}", nid(i)), bounds.h_min[t][i], bounds.h_max[t][i], 0.0);
        }
        for j in 0..n_p {
            lp.add_col(
                format!("eta_{t}_{}", lid(j)),
                bounds.eta_lower[t][j],
                bounds.eta_upper[t][j],
                0.0,
            );
        }
        for j in 0..n_p {
            let (lo, hi) = bounds.theta(&params, t, j);
            lp.add_col(format!("theta_{t}_{}", lid(j)), lo, hi, 0.0);
        }
        for i in 0..n_n {
            lp.add_col(format!("alpha_{t}_{}", nid(i)), 0.0, bounds.alpha_upper, 0.0);
        }
        let weight = |j: usize| -scc.w[j] / n_t as f64;
        for j in 0..n_p {
            lp.add_col(format!("sp_{t}_{}", lid(j)), 0.0, 1.0, weight(j));
        }
        for j in 0..n_p {
            lp.add_col(format!("sm_{t}_{}", lid(j)), 0.0, 1.0, weight(j));
        }
        for j in 0..n_p {
            let (lo, hi) = match fixed_z[j] {
                Some(0.0) => (0.0, 0.0),
                _ if is_prv(j) => (1.0, 1.0),
                _ => (0.0, 1.0),
            };
            lp.add_col(format!("vp_{t}_{}", lid(j)), lo, hi, 0.0);
        }
        for j in 0..n_p {
            let (lo, hi) = match fixed_z[j] {
                Some(0.0) => (0.0, 0.0),
                _ if is_prv(j) => (0.0, 0.0),
                _ => (0.0, 1.0),
            };
            lp.add_col(format!("vm_{t}_{}", lid(j)), lo, hi, 0.0);
        }
    }
    for j in 0..n_p {
        let (lo, hi) = fixed_z[j].map_or((0.0, 1.0), |v| (v, v));
        lp.add_col(format!("z_{}", net.links[j].id), lo, hi, 0.0);
    }
    for i in 0..n_n {
        lp.add_col(
            format!("y_{}", net.nodes[i].id),
            0.0,
            if y_free[i] { 1.0 } else { 0.0 },
            0.0,
        );
    }
    debug_assert_eq!(lp.n_cols(), map.total());

    let mut n_hw_cuts = 0;
    let mut n_sigmoid_cuts = 0;
    for t in 0..n_t {
        // Mass balance: inflow - outflow - α = demand.
        let mut mass: Vec<Vec<(usize, f64)>> = (0..n_n).map(|i| vec![(map.alpha(t, i), -1.0)]).collect();
        for (j, link) in net.links.iter().enumerate() {
            if let NodeRef::Demand(i) = link.from {
                mass[i].push((map.q(t, j), -1.0));
            }
            if let NodeRef::Demand(i) = link.to {
                mass[i].push((map.q(t, j), 1.0));
            }
        }
        for (i, coeffs) in mass.into_iter().enumerate() {
            lp.add_row(
                format!("mass_{t}_{}", net.nodes[i].id),
                coeffs,
                Sense::Eq,
                net.demands[t][i],
            );
        }
        // Energy: h_to - h_from + θ + η = 0 with known source heads moved right.
        for (j, link) in net.links.iter().enumerate() {
            let mut coeffs = vec![(map.theta(t, j), 1.0), (map.eta(t, j), 1.0)];
            let mut rhs = 0.0;
            match link.to {
                NodeRef::Demand(i) => coeffs.push((map.h(t, i), 1.0)),
                NodeRef::Source(s) => rhs -= net.source_heads[t][s],
            }
            match link.from {
                NodeRef::Demand(i) => coeffs.push((map.h(t, i), -1.0)),
                NodeRef::Source(s) => rhs += net.source_heads[t][s],
            }
            lp.add_row(format!("energy_{t}_{}", link.id), coeffs, Sense::Eq, rhs);
        }
        for j in 0..n_p {
            let id = &net.links[j].id;
            let (ql, qu) = (bounds.q_lower[t][j], bounds.q_upper[t][j]);
            let (tl, tu) = bounds.theta(&params, t, j);
            let (el, eu) = (bounds.eta_lower[t][j], bounds.eta_upper[t][j]);
            let (q, th, eta) = (map.q(t, j), map.theta(t, j), map.eta(t, j));
            let (vp, vm) = (map.v_plus(t, j), map.v_minus(t, j));
            lp.add_row(format!("bigm_a_{t}_{id}"), vec![(eta, 1.0), (vp, -eu)], Sense::Le, 0.0);
            lp.add_row(format!("bigm_b_{t}_{id}"), vec![(eta, -1.0), (vm, el)], Sense::Le, 0.0);
            lp.add_row(format!("bigm_c_{t}_{id}"), vec![(q, -1.0), (vp, -ql)], Sense::Le, -ql);
            lp.add_row(format!("bigm_d_{t}_{id}"), vec![(q, 1.0), (vm, qu)], Sense::Le, qu);
            lp.add_row(format!("bigm_e_{t}_{id}"), vec![(th, -1.0), (vp, -tl)], Sense::Le, -tl);
            lp.add_row(format!("bigm_f_{t}_{id}"), vec![(th, 1.0), (vm, tu)], Sense::Le, tu);
            lp.add_row(
                format!("dir_{t}_{id}"),
                vec![(vp, 1.0), (vm, 1.0), (map.z(j), -1.0)],
                Sense::Le,
                0.0,
            );

            let env = hw_envelope(params.r[j], params.n_exp[j], ql, qu);
            for (k, cut) in env.cuts().into_iter().enumerate() {
                push_cut(&mut lp, format!("hw_{t}_{id}_{k}"), q, th, cut);
                n_hw_cuts += 1;
            }
            let area = net.links[j].area;
            let (ul, uu) = (ql / area, qu / area);
            let plus = sigmoid_plus_envelope(scc.rho, scc.u_min[j], ul, uu);
            for (k, cut) in plus.cuts().into_iter().enumerate() {
                push_cut(
                    &mut lp,
                    format!("sp_{t}_{id}_{k}"),
                    q,
                    map.sigma_plus(t, j),
                    cut.velocity_to_flow(area),
                );
                n_sigmoid_cuts += 1;
            }
            let minus = sigmoid_minus_envelope(scc.rho, scc.u_min[j], ul, uu);
            for (k, cut) in minus.cuts().into_iter().enumerate() {
                push_cut(
                    &mut lp,
                    format!("sm_{t}_{id}_{k}"),
                    q,
                    map.sigma_minus(t, j),
                    cut.velocity_to_flow(area),
                );
                n_sigmoid_cuts += 1;
            }
        }
        for i in 0..n_n {
            lp.add_row(
                format!("flush_{t}_{}", net.nodes[i].id),
                vec![(map.alpha(t, i), 1.0), (map.y(i), -bounds.alpha_upper)],
                Sense::Le,
                0.0,
            );
        }
    }
    let zc: Vec<(usize, f64)> = design.dbv_candidates.iter().map(|&j| (map.z(j), 1.0)).collect();
    lp.add_row("count_dbv", zc, Sense::Eq, design.n_v as f64);
    let yc: Vec<(usize, f64)> = design.afv_candidates.iter().map(|&i| (map.y(i), 1.0)).collect();
    lp.add_row("count_afv", yc, Sense::Eq, design.n_f as f64);

    lp.validate().map_err(|e| match e {
        crate::lp::LpError::InconsistentBounds { name, lower, upper } => {
            RelaxError::InconsistentBounds { name, lower, upper }
        }
        other => panic!("relaxation assembly produced an invalid program: {other}"),
    })?;
    Ok(Relaxation {
        lp,
        map,
        n_hw_cuts,
        n_sigmoid_cuts,
    })
}

/// Fractional placements and the valve losses of a solved relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fractional {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `η[t][link]`.
    pub eta: Vec<Vec<f64>>,
}

pub fn extract_fractional(sol: &LpSolution, map: &VariableMap) -> Result<Fractional, RelaxError> {
    if sol.status != LpStatus::Optimal {
        return Err(RelaxError::NotOptimal(sol.status));
    }
    let y = (0..map.n_n).map(|i| sol.x[map.y(i)].clamp(0.0, 1.0)).collect();
    let z = (0..map.n_p).map(|j| sol.x[map.z(j)].clamp(0.0, 1.0)).collect();
    let eta = (0..map.n_t)
        .map(|t| (0..map.n_p).map(|j| sol.x[map.eta(t, j)]).collect())
        .collect();
    Ok(Fractional { y, z, eta })
}

/// Upper bound on the achievable smoothed SCC.
pub fn lp_bound(sol: &LpSolution) -> f64 {
    -sol.objective
}

/// Integral valve decisions together with a hydraulic state.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralPoint<'a> {
    pub q: &'a [Vec<f64>],
    pub h: &'a [Vec<f64>],
    pub eta: &'a [Vec<f64>],
    pub alpha: &'a [Vec<f64>],
    pub y: &'a [bool],
    pub z: &'a [bool],
    /// `[t][link]`: valve acts in the positive (`Some(true)`) or negative direction.
    pub direction: &'a [Vec<Option<bool>>],
}

/// Map a simulated state with integral decisions onto the relaxation's
/// columns, with `θ = φ(q)` and `σ = ψ(u)`.
pub fn embed(net: &NetworkModel, scc: &SccParams, map: &VariableMap, p: &IntegralPoint) -> Vec<f64> {
    let params = headloss_params(net);
    let mut x = vec![0.0; map.total()];
    for t in 0..map.n_t {
        for j in 0..map.n_p {
            let q = p.q[t][j];
            let u = q / net.links[j].area;
            x[map.q(t, j)] = q;
            x[map.eta(t, j)] = p.eta[t][j];
            x[map.theta(t, j)] = phi(params.r[j], params.n_exp[j], q);
            x[map.sigma_plus(t, j)] = crate::objective::psi_plus(u, scc.rho, scc.u_min[j]);
            x[map.sigma_minus(t, j)] = crate::objective::psi_minus(u, scc.rho, scc.u_min[j]);
            match p.direction[t][j] {
                Some(true) => x[map.v_plus(t, j)] = 1.0,
                Some(false) => x[map.v_minus(t, j)] = 1.0,
                None => {}
            }
        }
        for i in 0..map.n_n {
            x[map.h(t, i)] = p.h[t][i];
            x[map.alpha(t, i)] = p.alpha[t][i];
        }
    }
    for j in 0..map.n_p {
        x[map.z(j)] = if p.z[j] { 1.0 } else { 0.0 };
    }
    for i in 0..map.n_n {
        x[map.y(i)] = if p.y[i] { 1.0 } else { 0.0 };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::hydraulics::HydraulicSolver;
    use crate::lp::{LpSolver, SimplexSolver};
    use crate::objective::scc_smooth;
    use crate::problem_stats;

    #[test]
    fn variable_map_is_a_partition() {
        let map = VariableMap::new(5, 3, 2);
        let mut seen = vec![0; map.total()];
        for t in 0..2 {
            for j in 0..5 {
                for c in [
                    map.q(t, j),
                    map.eta(t, j),
                    map.theta(t, j),
                    map.sigma_plus(t, j),
                    map.sigma_minus(t, j),
                    map.v_plus(t, j),
                    map.v_minus(t, j),
                ] {
                    seen[c] += 1;
                }
            }
            for i in 0..3 {
                seen[map.h(t, i)] += 1;
                seen[map.alpha(t, i)] += 1;
            }
        }
        (0..5).for_each(|j| seen[map.z(j)] += 1);
        (0..3).for_each(|i| seen[map.y(i)] += 1);
        assert!(seen.iter().all(|&c| c == 1));
        let c = map.counts();
        assert_eq!(c.continuous + c.sigma + c.relaxed_binary, c.total);
    }

    #[test]
    fn counts_agree_with_problem_stats() {
        for (p, n) in [(98, 67), (317, 268)] {
            let c = VariableMap::new(p, n, 4).counts();
            let s = crate::ProblemStats::from_dims(p, n, 4);
            assert_eq!(
                (c.continuous, c.relaxed_binary, c.nonconvex),
                (s.continuous, s.binary, s.nonconvex)
            );
        }
        let net = fixtures::grid(3, 3);
        let relax = build_lp(
            &net,
            &SccParams::new(&net, 50.0, 0.2),
            &initial_bounds(&net, &BoundOptions::default(), None, 0),
            &DesignConfig::from_network(&net, 1, 1),
        )
        .unwrap();
        let s = problem_stats(&net, 1);
        assert_eq!(relax.lp.n_cols(), s.continuous + s.binary + 2 * net.n_links());
        // Rows: mass, energy, seven per link, one per node, two counts, plus cuts.
        let expected = net.n_nodes() * 2 + net.n_links() * 8 + 2 + relax.n_hw_cuts + relax.n_sigmoid_cuts;
        assert_eq!(relax.lp.n_rows(), expected);
    }

    #[test]
    fn eta_bounds_bracket_zero_and_follow_heads() {
        let net = fixtures::single_pipe();
        let b = initial_bounds(&net, &BoundOptions::default(), None, 0);
        // R1 (50 m) -> J1 (h_min 15): η ∈ [50 - 50, 50 - 15] clipped to contain zero.
        assert_eq!(b.eta_upper[0][0], 35.0);
        assert_eq!(b.eta_lower[0][0], 0.0);
        assert_eq!(b.h_min[0][0], 15.0);
        let area = net.links[0].area;
        assert!((b.q_upper[0][0] - 3.0 * area).abs() < 1e-15);
    }

    #[test]
    fn forest_bounds_follow_demand() {
        let net = fixtures::triangle_with_pendant();
        let d = crate::forest_core(&net);
        let b = initial_bounds(&net, &BoundOptions::default(), Some(&d), 1);
        let p4 = net.link_index()["P4"];
        assert!((b.q_lower[0][p4] - 0.001).abs() < 1e-15);
        assert!((b.q_upper[0][p4] - (0.001_f64 + 0.025).min(3.0 * net.links[p4].area)).abs() < 1e-15);
    }

    fn solve(net: &NetworkModel, n_v: usize, n_f: usize) -> (Relaxation, LpSolution) {
        let scc = SccParams::new(net, 50.0, 0.2);
        let bounds = initial_bounds(net, &BoundOptions::default(), None, n_f);
        let relax = build_lp(net, &scc, &bounds, &DesignConfig::from_network(net, n_v, n_f)).unwrap();
        let sol = SimplexSolver::default().solve(&relax.lp, None);
        (relax, sol)
    }

    #[test]
    fn no_valves_collapse_controls() {
        let net = fixtures::single_loop();
        let (relax, sol) = solve(&net, 0, 0);
        assert!(sol.is_optimal());
        let m = relax.map;
        for j in 0..net.n_links() {
            assert!(sol.x[m.eta(0, j)].abs() < 1e-9);
            assert!(sol.x[m.z(j)].abs() < 1e-12);
        }
        for i in 0..net.n_nodes() {
            assert!(sol.x[m.alpha(0, i)].abs() < 1e-9);
        }
    }

    #[test]
    fn bound_dominates_uncontrolled_single_pipe() {
        let net = fixtures::single_pipe();
        let (relax, sol) = solve(&net, 0, 1);
        let scc = SccParams::new(&net, 50.0, 0.2);
        let state = HydraulicSolver::new(&net).simulate_uncontrolled().unwrap();
        let f = scc_smooth(&state.q, &net, &scc);
        assert!(lp_bound(&sol) >= f - 1e-9);
        let frac = extract_fractional(&sol, &relax.map).unwrap();
        assert!((frac.y.iter().sum::<f64>() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn simulated_point_satisfies_every_row() {
        let net = fixtures::single_loop();
        let scc = SccParams::new(&net, 50.0, 0.2);
        let bounds = initial_bounds(&net, &BoundOptions::default(), None, 0);
        let relax = build_lp(&net, &scc, &bounds, &DesignConfig::from_network(&net, 0, 0)).unwrap();
        let st = HydraulicSolver::new(&net).simulate_uncontrolled().unwrap();
        let dirs = vec![vec![None; net.n_links()]];
        let x = embed(
            &net,
            &scc,
            &relax.map,
            &IntegralPoint {
                q: &st.q,
                h: &st.h,
                eta: &st.eta,
                alpha: &st.alpha,
                y: &vec![false; net.n_nodes()],
                z: &vec![false; net.n_links()],
                direction: &dirs,
            },
        );
        assert!(relax.lp.max_violation(&x) < 1e-6, "{}", relax.lp.max_violation(&x));
    }

    #[test]
    fn rejects_too_many_valves() {
        let net = fixtures::single_pipe();
        let scc = SccParams::new(&net, 50.0, 0.2);
        let bounds = initial_bounds(&net, &BoundOptions::default(), None, 0);
        let err = build_lp(&net, &scc, &bounds, &DesignConfig::from_network(&net, 2, 0)).unwrap_err();
        assert!(matches!(err, RelaxError::TooManyValves { requested: 2, .. }));
        let mut bad = bounds.clone();
        bad.q_lower[0][0] = 1.0;
        assert!(matches!(
            build_lp(&net, &scc, &bad, &DesignConfig::from_network(&net, 0, 0)),
            Err(RelaxError::InconsistentBounds { .. })
        ));
    }
}
