//! Water distribution network data model.
//!
//! A network is a directed graph of links (pipes and valves) joining demand
//! nodes and known-head source nodes. Demands and source heads are stored as
//! one snapshot per hydraulic timestep. Everything is in SI units: metres,
//! square metres and cubic metres per second.

mod builder;
mod decomposition;
pub mod inp;
mod stats;

pub use builder::NetworkBuilder;
pub use decomposition::{forest_core, ForestCoreDecomposition, ForestLink};
pub use stats::{problem_stats, ProblemStats};

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while validating a network.
#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("link {link}: {reason}")]
    InvalidLink { link: String, reason: String },
    #[error("node {node}: {reason}")]
    InvalidNode { node: String, reason: String },
    #[error("duplicate identifier {0}")]
    DuplicateId(String),
    #[error("network has no timesteps")]
    NoTimesteps,
    #[error("timestep data shape mismatch: {0}")]
    Shape(String),
    #[error("network has no source node")]
    NoSource,
    #[error("network is disconnected: node {0} cannot be reached from any source")]
    Disconnected(String),
}

/// Endpoint of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRef {
    Demand(usize),
    Source(usize),
}

impl NodeRef {
    pub fn demand(self) -> Option<usize> {
        match self {
            NodeRef::Demand(i) => Some(i),
            NodeRef::Source(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Pipe,
    Valve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub from: NodeRef,
    pub to: NodeRef,
    pub kind: LinkKind,
    /// Length in metres. Zero for valves.
    pub length: f64,
    /// Internal diameter in metres.
    pub diameter: f64,
    /// Hazen-Williams roughness coefficient (pipes only).
    pub roughness: f64,
    /// Local loss coefficient K (valves only).
    pub loss_coefficient: f64,
    /// Cross-sectional area in square metres.
    pub area: f64,
    pub is_existing_prv: bool,
    pub is_existing_dbv: bool,
}

impl Link {
    pub fn pipe(id: impl Into<String>, from: NodeRef, to: NodeRef, length: f64, diameter: f64, roughness: f64) -> Self {
        Link {
            id: id.into(),
            from,
            to,
            kind: LinkKind::Pipe,
            length,
            diameter,
            roughness,
            loss_coefficient: 0.0,
            area: circle_area(diameter),
            is_existing_prv: false,
            is_existing_dbv: false,
        }
    }

    pub fn valve(id: impl Into<String>, from: NodeRef, to: NodeRef, diameter: f64, loss_coefficient: f64) -> Self {
        Link {
            id: id.into(),
            from,
            to,
            kind: LinkKind::Valve,
            length: 0.0,
            diameter,
            roughness: 0.0,
            loss_coefficient,
            area: circle_area(diameter),
            is_existing_prv: false,
            is_existing_dbv: false,
        }
    }

    /// True when the link is a fixed control valve (existing PRV or DBV).
    pub fn is_existing_control(&self) -> bool {
        self.is_existing_prv || self.is_existing_dbv
    }
}

pub fn circle_area(diameter: f64) -> f64 {
    std::f64::consts::PI * diameter * diameter / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandNode {
    pub id: String,
    /// Elevation in metres.
    pub elevation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceNode {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<(f64, f64)>,
}

/// Sparse link-node incidence matrix stored as `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct Incidence {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Incidence {
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.cols]; self.rows];
        for &(r, c, v) in &self.entries {
            m[r][c] += v;
        }
        m
    }
}

/// Immutable network model shared by every stage of the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub links: Vec<Link>,
    pub nodes: Vec<DemandNode>,
    pub sources: Vec<SourceNode>,
    /// `demands[t][i]`, m³/s.
    pub demands: Vec<Vec<f64>>,
    /// `source_heads[t][s]`, m.
    pub source_heads: Vec<Vec<f64>>,
}

impl NetworkModel {
    /// Validate and assemble a network.
    pub fn new(
        links: Vec<Link>,
        nodes: Vec<DemandNode>,
        sources: Vec<SourceNode>,
        demands: Vec<Vec<f64>>,
        source_heads: Vec<Vec<f64>>,
    ) -> Result<Self, NetworkError> {
        let net = NetworkModel {
            links,
            nodes,
            sources,
            demands,
            source_heads,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut seen = std::collections::HashSet::new();
        for id in self
            .nodes
            .iter()
            .map(|n| &n.id)
            .chain(self.sources.iter().map(|s| &s.id))
        {
            if !seen.insert(id.as_str()) {
                return Err(NetworkError::DuplicateId(id.clone()));
            }
        }
        let mut seen_links = std::collections::HashSet::new();
        for link in &self.links {
            if !seen_links.insert(link.id.as_str()) {
                return Err(NetworkError::DuplicateId(link.id.clone()));
            }
            self.validate_link(link)?;
        }
        if self.sources.is_empty() {
            return Err(NetworkError::NoSource);
        }
        if self.demands.is_empty() {
            return Err(NetworkError::NoTimesteps);
        }
        if self.source_heads.len() != self.demands.len() {
            return Err(NetworkError::Shape(format!(
                "{} demand snapshots but {} source-head snapshots",
                self.demands.len(),
                self.source_heads.len()
            )));
        }
        for (t, d) in self.demands.iter().enumerate() {
            if d.len() != self.nodes.len() {
                return Err(NetworkError::Shape(format!(
                    "timestep {t}: {} demands for {} nodes",
                    d.len(),
                    self.nodes.len()
                )));
            }
            for (i, &v) in d.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(NetworkError::InvalidNode {
                        node: self.nodes[i].id.clone(),
                        reason: format!("demand {v} at timestep {t} must be finite and non-negative"),
                    });
                }
            }
        }
        for (t, h) in self.source_heads.iter().enumerate() {
            if h.len() != self.sources.len() || h.iter().any(|v| !v.is_finite()) {
                return Err(NetworkError::Shape(format!(
                    "timestep {t}: source heads must be {} finite values",
                    self.sources.len()
                )));
            }
        }
        for node in &self.nodes {
            if !node.elevation.is_finite() {
                return Err(NetworkError::InvalidNode {
                    node: node.id.clone(),
                    reason: "elevation must be finite".into(),
                });
            }
        }
        self.check_connected()
    }

    fn validate_link(&self, link: &Link) -> Result<(), NetworkError> {
        let bad = |reason: String| NetworkError::InvalidLink {
            link: link.id.clone(),
            reason,
        };
        for end in [link.from, link.to] {
            let ok = match end {
                NodeRef::Demand(i) => i < self.nodes.len(),
                NodeRef::Source(s) => s < self.sources.len(),
            };
            if !ok {
                return Err(bad(format!("endpoint {end:?} does not exist")));
            }
        }
        if link.from == link.to {
            return Err(bad("link joins a node to itself".into()));
        }
        if !(link.diameter > 0.0 && link.diameter.is_finite()) {
            return Err(bad(format!("diameter {} must be positive", link.diameter)));
        }
        let area = circle_area(link.diameter);
        if (link.area - area).abs() > 1e-12 * area {
            return Err(bad(format!("area {} inconsistent with diameter", link.area)));
        }
        match link.kind {
            LinkKind::Pipe => {
                if !(link.length > 0.0 && link.length.is_finite()) {
                    return Err(bad(format!("length {} must be positive", link.length)));
                }
                if !(link.roughness > 0.0 && link.roughness.is_finite()) {
                    return Err(bad(format!(
                        "Hazen-Williams coefficient {} must be positive",
                        link.roughness
                    )));
                }
            }
            LinkKind::Valve => {
                if !(link.loss_coefficient >= 0.0 && link.loss_coefficient.is_finite()) {
                    return Err(bad(format!(
                        "loss coefficient {} must be non-negative",
                        link.loss_coefficient
                    )));
                }
                if !(link.length >= 0.0 && link.length.is_finite()) {
                    return Err(bad(format!("length {} must be non-negative", link.length)));
                }
            }
        }
        if link.is_existing_prv && link.is_existing_dbv {
            return Err(bad("link cannot be both an existing PRV and an existing DBV".into()));
        }
        Ok(())
    }

    fn check_connected(&self) -> Result<(), NetworkError> {
        let adj = self.adjacency();
        let n = self.nodes.len() + self.sources.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for s in 0..self.sources.len() {
            let v = self.vertex(NodeRef::Source(s));
            seen[v] = true;
            queue.push_back(v);
        }
        while let Some(v) = queue.pop_front() {
            for &(_, w) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if let Some(i) = (0..self.nodes.len()).find(|&i| !seen[i]) {
            return Err(NetworkError::Disconnected(self.nodes[i].id.clone()));
        }
        Ok(())
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_timesteps(&self) -> usize {
        self.demands.len()
    }

    pub fn elevations(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.elevation).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.links.iter().map(|l| l.length).sum()
    }

    /// Largest known source head over all sources and timesteps.
    pub fn max_source_head(&self) -> f64 {
        self.source_heads
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense vertex index: demand nodes first, then sources.
    pub fn vertex(&self, node: NodeRef) -> usize {
        match node {
            NodeRef::Demand(i) => i,
            NodeRef::Source(s) => self.nodes.len() + s,
        }
    }

    pub fn node_ref(&self, vertex: usize) -> NodeRef {
        if vertex < self.nodes.len() {
            NodeRef::Demand(vertex)
        } else {
            NodeRef::Source(vertex - self.nodes.len())
        }
    }

    pub fn node_id(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Demand(i) => &self.nodes[i].id,
            NodeRef::Source(s) => &self.sources[s].id,
        }
    }

    /// Undirected adjacency over dense vertex indices: `(link, neighbour)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len() + self.sources.len()];
        for (j, link) in self.links.iter().enumerate() {
            let a = self.vertex(link.from);
            let b = self.vertex(link.to);
            adj[a].push((j, b));
            adj[b].push((j, a));
        }
        adj
    }

    pub fn link_index(&self) -> HashMap<&str, usize> {
        self.links.iter().enumerate().map(|(j, l)| (l.id.as_str(), j)).collect()
    }

    pub fn node_index(&self) -> HashMap<&str, NodeRef> {
        let mut m: HashMap<&str, NodeRef> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), NodeRef::Demand(i)))
            .collect();
        for (s, src) in self.sources.iter().enumerate() {
            m.insert(src.id.as_str(), NodeRef::Source(s));
        }
        m
    }

    /// Head of an endpoint at timestep `t` when known (sources only).
    pub fn known_head(&self, node: NodeRef, t: usize) -> Option<f64> {
        match node {
            NodeRef::Source(s) => Some(self.source_heads[t][s]),
            NodeRef::Demand(_) => None,
        }
    }

    /// Link-to-demand-node incidence: −1 at the start node, +1 at the end node.
    pub fn incidence_a12(&self) -> Incidence {
        let mut entries = Vec::with_capacity(2 * self.links.len());
        for (j, link) in self.links.iter().enumerate() {
            if let NodeRef::Demand(i) = link.from {
                entries.push((j, i, -1.0));
            }
            if let NodeRef::Demand(i) = link.to {
                entries.push((j, i, 1.0));
            }
        }
        Incidence {
            rows: self.links.len(),
            cols: self.nodes.len(),
            entries,
        }
    }

    /// Link-to-source incidence with the same sign convention as [`Self::incidence_a12`].
    pub fn incidence_a10(&self) -> Incidence {
        let mut entries = Vec::new();
        for (j, link) in self.links.iter().enumerate() {
            if let NodeRef::Source(s) = link.from {
                entries.push((j, s, -1.0));
            }
            if let NodeRef::Source(s) = link.to {
                entries.push((j, s, 1.0));
            }
        }
        Incidence {
            rows: self.links.len(),
            cols: self.sources.len(),
            entries,
        }
    }

    /// Demand nodes with non-zero demand at any timestep.
    pub fn has_demand(&self, node: usize) -> bool {
        self.demands.iter().any(|d| d[node] > 0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, crate::Error> {
        let net: NetworkModel = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}
