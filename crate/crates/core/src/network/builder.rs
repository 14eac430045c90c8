use std::collections::HashMap;

use super::{DemandNode, Link, NetworkError, NetworkModel, NodeRef, SourceNode};

/// Incremental construction of a [`NetworkModel`] by identifier.
///
/// Links may reference nodes declared later; references are resolved in
/// [`NetworkBuilder::build`].
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    n_t: usize,
    nodes: Vec<DemandNode>,
    demands: Vec<Vec<f64>>,
    sources: Vec<SourceNode>,
    heads: Vec<Vec<f64>>,
    links: Vec<(Link, String, String)>,
    prv: Vec<String>,
    dbv: Vec<String>,
}

impl NetworkBuilder {
    pub fn new(n_timesteps: usize) -> Self {
        NetworkBuilder {
            n_t: n_timesteps,
            nodes: Vec::new(),
            demands: Vec::new(),
            sources: Vec::new(),
            heads: Vec::new(),
            links: Vec::new(),
            prv: Vec::new(),
            dbv: Vec::new(),
        }
    }

    pub fn source(&mut self, id: &str, head: f64) -> &mut Self {
        let heads = vec![head; self.n_t];
        self.source_with_heads(id, heads)
    }

    pub fn source_with_heads(&mut self, id: &str, heads: Vec<f64>) -> &mut Self {
        self.sources.push(SourceNode {
            id: id.to_string(),
            coordinates: None,
        });
        self.heads.push(heads);
        self
    }

    pub fn junction(&mut self, id: &str, elevation: f64, demand: f64) -> &mut Self {
        let d = vec![demand; self.n_t];
        self.junction_with_demands(id, elevation, d)
    }

    pub fn junction_with_demands(&mut self, id: &str, elevation: f64, demands: Vec<f64>) -> &mut Self {
        self.nodes.push(DemandNode {
            id: id.to_string(),
            elevation,
            coordinates: None,
        });
        self.demands.push(demands);
        self
    }

    pub fn coordinates(&mut self, id: &str, x: f64, y: f64) -> &mut Self {
        if let Some(n) = self.nodes.iter_mut().find(|n| n.id == id) {
            n.coordinates = Some((x, y));
        } else if let Some(s) = self.sources.iter_mut().find(|s| s.id == id) {
            s.coordinates = Some((x, y));
        }
        self
    }

    pub fn pipe(&mut self, id: &str, from: &str, to: &str, length: f64, diameter: f64, roughness: f64) -> &mut Self {
        let placeholder = NodeRef::Demand(usize::MAX);
        let link = Link::pipe(id, placeholder, placeholder, length, diameter, roughness);
        self.links.push((link, from.to_string(), to.to_string()));
        self
    }

    pub fn valve(&mut self, id: &str, from: &str, to: &str, diameter: f64, loss_coefficient: f64) -> &mut Self {
        let placeholder = NodeRef::Demand(usize::MAX);
        let link = Link::valve(id, placeholder, placeholder, diameter, loss_coefficient);
        self.links.push((link, from.to_string(), to.to_string()));
        self
    }

    /// Flag an existing link as a fixed, unidirectional PRV.
    pub fn prv(&mut self, link_id: &str) -> &mut Self {
        self.prv.push(link_id.to_string());
        self
    }

    /// Flag an existing link as a fixed, bidirectional DBV.
    pub fn dbv(&mut self, link_id: &str) -> &mut Self {
        self.dbv.push(link_id.to_string());
        self
    }

    pub fn build(&self) -> Result<NetworkModel, NetworkError> {
        let mut index: HashMap<&str, NodeRef> = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if index.insert(&n.id, NodeRef::Demand(i)).is_some() {
                return Err(NetworkError::DuplicateId(n.id.clone()));
            }
        }
        for (s, src) in self.sources.iter().enumerate() {
            if index.insert(&src.id, NodeRef::Source(s)).is_some() {
                return Err(NetworkError::DuplicateId(src.id.clone()));
            }
        }
        let resolve = |link: &Link, id: &str| {
            index.get(id).copied().ok_or_else(|| NetworkError::InvalidLink {
                link: link.id.clone(),
                reason: format!("unknown node {id}"),
            })
        };
        let mut links = Vec::with_capacity(self.links.len());
        for (link, from, to) in &self.links {
            let mut link = link.clone();
            link.from = resolve(&link, from)?;
            link.to = resolve(&link, to)?;
            link.is_existing_prv = self.prv.contains(&link.id);
            link.is_existing_dbv = self.dbv.contains(&link.id);
            links.push(link);
        }
        for id in self.prv.iter().chain(&self.dbv) {
            if !links.iter().any(|l| &l.id == id) {
                return Err(NetworkError::InvalidLink {
                    link: id.clone(),
                    reason: "valve flag refers to an unknown link".into(),
                });
            }
        }
        let demands = (0..self.n_t)
            .map(|t| {
                self.demands
                    .iter()
                    .map(|d| d.get(t).copied().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        let heads = (0..self.n_t)
            .map(|t| {
                self.heads
                    .iter()
                    .map(|h| h.get(t).copied().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        NetworkModel::new(links, self.nodes.clone(), self.sources.clone(), demands, heads)
    }
}
