//! Self-cleaning capacity (SCC) objective, its sigmoid smoothing, and the
//! average zone pressure (AZP) metric.
//!
//! A pipe is self-cleaning at a timestep when its velocity magnitude exceeds
//! a threshold `u_min`. SCC is the length-weighted fraction of self-cleaning
//! pipes averaged over timesteps. The smooth variant replaces the indicator
//! by `ψ⁺(u) + ψ⁻(u)`, two logistic sigmoids with curvature `ρ`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::network::NetworkModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SccParams {
    /// Threshold velocity per link (m/s).
    pub u_min: Vec<f64>,
    pub rho: f64,
    /// Link weights; zero outside the objective subset, summing to one.
    pub w: Vec<f64>,
}

impl SccParams {
    /// Length weights over every link with a uniform threshold.
    pub fn new(net: &NetworkModel, rho: f64, u_min: f64) -> Self {
        let all: Vec<usize> = (0..net.n_links()).collect();
        Self::with_subset(net, rho, u_min, &all)
    }

    /// Length weights restricted to `links`.
    pub fn with_subset(net: &NetworkModel, rho: f64, u_min: f64, links: &[usize]) -> Self {
        let mut w = vec![0.0; net.n_links()];
        let total: f64 = links.iter().map(|&j| net.links[j].length).sum();
        if total > 0.0 {
            for &j in links {
                w[j] = net.links[j].length / total;
            }
        }
        SccParams {
            u_min: vec![u_min; net.n_links()],
            rho,
            w,
        }
    }
}

/// Logistic function evaluated without exponentiating a large positive number.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ψ⁺(u) = σ(ρ (u - u_min))`.
pub fn psi_plus(u: f64, rho: f64, u_min: f64) -> f64 {
    sigmoid(rho * (u - u_min))
}

/// `ψ⁻(u) = σ(ρ (-u - u_min))`.
pub fn psi_minus(u: f64, rho: f64, u_min: f64) -> f64 {
    sigmoid(rho * (-u - u_min))
}

/// Derivative of `ψ⁺` with respect to `u`.
pub fn psi_plus_prime(u: f64, rho: f64, u_min: f64) -> f64 {
    let s = psi_plus(u, rho, u_min);
    rho * s * (1.0 - s)
}

/// Derivative of `ψ⁻` with respect to `u`.
pub fn psi_minus_prime(u: f64, rho: f64, u_min: f64) -> f64 {
    let s = psi_minus(u, rho, u_min);
    -rho * s * (1.0 - s)
}

/// Indicator SCC of flows `q[t][j]`.
pub fn scc_indicator(q: &[Vec<f64>], net: &NetworkModel, params: &SccParams) -> f64 {
    let n_t = q.len() as f64;
    let mut total = 0.0;
    for qt in q {
        for (j, link) in net.links.iter().enumerate() {
            if (qt[j] / link.area).abs() > params.u_min[j] {
                total += params.w[j];
            }
        }
    }
    total / n_t
}

/// Sigmoid-smoothed SCC of flows `q[t][j]`.
pub fn scc_smooth(q: &[Vec<f64>], net: &NetworkModel, params: &SccParams) -> f64 {
    let n_t = q.len() as f64;
    q.iter().map(|qt| scc_smooth_timestep(qt, net, params)).sum::<f64>() / n_t
}

/// Contribution of one timestep, before averaging over timesteps.
pub fn scc_smooth_timestep(qt: &[f64], net: &NetworkModel, params: &SccParams) -> f64 {
    let mut total = 0.0;
    for (j, link) in net.links.iter().enumerate() {
        if params.w[j] == 0.0 {
            continue;
        }
        let u = qt[j] / link.area;
        total += params.w[j] * (psi_plus(u, params.rho, params.u_min[j]) + psi_minus(u, params.rho, params.u_min[j]));
    }
    total
}

/// Gradient of [`scc_smooth_timestep`] with respect to the flows of that timestep.
pub fn scc_smooth_timestep_grad(qt: &[f64], net: &NetworkModel, params: &SccParams) -> Vec<f64> {
    net.links
        .iter()
        .enumerate()
        .map(|(j, link)| {
            if params.w[j] == 0.0 {
                return 0.0;
            }
            let u = qt[j] / link.area;
            let d = psi_plus_prime(u, params.rho, params.u_min[j]) + psi_minus_prime(u, params.rho, params.u_min[j]);
            params.w[j] * d / link.area
        })
        .collect()
}

/// Gradient of [`scc_smooth`] with respect to `q[t][j]`.
pub fn scc_smooth_grad(q: &[Vec<f64>], net: &NetworkModel, params: &SccParams) -> Vec<Vec<f64>> {
    let n_t = q.len() as f64;
    q.iter()
        .map(|qt| {
            let mut g = scc_smooth_timestep_grad(qt, net, params);
            g.iter_mut().for_each(|v| *v /= n_t);
            g
        })
        .collect()
}

/// Nodal AZP weights: half the length of every incident link, normalised
/// over junctions so the weights sum to one.
pub fn azp_weights(net: &NetworkModel) -> Vec<f64> {
    let mut w = vec![0.0; net.n_nodes()];
    for link in &net.links {
        for end in [link.from, link.to] {
            if let Some(i) = end.demand() {
                w[i] += 0.5 * link.length;
            }
        }
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|v| *v /= total);
    } else {
        let n = net.n_nodes() as f64;
        w.iter_mut().for_each(|v| *v = 1.0 / n);
    }
    w
}

/// Average zone pressure (m) of heads `h[t][i]`.
pub fn azp(h: &[Vec<f64>], net: &NetworkModel) -> f64 {
    let w = azp_weights(net);
    let n_t = h.len() as f64;
    h.iter()
        .map(|ht| {
            net.nodes
                .iter()
                .enumerate()
                .map(|(i, node)| w[i] * (ht[i] - node.elevation))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n_t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub link_id: String,
    pub max_velocity: f64,
    pub cum_length_fraction: f64,
}

/// Length-weighted distribution of the per-link peak velocity magnitude.
/// Links with equal peak velocity share the cumulative value at the end of
/// their group.
pub fn velocity_cdf(q: &[Vec<f64>], net: &NetworkModel) -> Vec<CdfPoint> {
    let total = net.total_length();
    let mut rows: Vec<(usize, f64)> = net
        .links
        .iter()
        .enumerate()
        .map(|(j, link)| {
            let peak = q.iter().map(|qt| (qt[j] / link.area).abs()).fold(0.0, f64::max);
            (j, peak)
        })
        .collect();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out = Vec::with_capacity(rows.len());
    let mut k = 0;
    let mut cum = 0.0;
    while k < rows.len() {
        let mut end = k;
        while end < rows.len() && rows[end].1 == rows[k].1 {
            cum += net.links[rows[end].0].length;
            end += 1;
        }
        let fraction = if total > 0.0 {
            cum / total
        } else {
            end as f64 / rows.len() as f64
        };
        for &(j, v) in &rows[k..end] {
            out.push(CdfPoint {
                link_id: net.links[j].id.clone(),
                max_velocity: v,
                cum_length_fraction: fraction,
            });
        }
        k = end;
    }
    out
}

/// Cumulative length fraction of links with peak velocity `≤ u`.
pub fn cdf_at(points: &[CdfPoint], u: f64) -> f64 {
    points
        .iter()
        .take_while(|p| p.max_velocity <= u)
        .last()
        .map_or(0.0, |p| p.cum_length_fraction)
}

pub fn velocity_cdf_csv(points: &[CdfPoint]) -> String {
    let mut out = String::from("link_id,max_velocity_mps,cum_length_fraction\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.link_id, p.max_velocity, p.cum_length_fraction);
    }
    out
}
