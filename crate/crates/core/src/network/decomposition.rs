use serde::{Deserialize, Serialize};

use super::{NetworkModel, NodeRef};

/// A pruned branch link whose flow is fixed by the demand downstream of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestLink {
    pub link: usize,
    /// +1 when the link's positive direction points into the pruned subtree.
    pub sign: f64,
    /// Demand nodes supplied through this link.
    pub downstream: Vec<usize>,
}

impl ForestLink {
    /// Flow implied by mass balance for the given nodal outflows (demand plus flushing).
    pub fn flow(&self, outflow: &[f64]) -> f64 {
        self.sign * self.downstream.iter().map(|&i| outflow[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestCoreDecomposition {
    pub core_links: Vec<usize>,
    pub forest: Vec<ForestLink>,
}

impl ForestCoreDecomposition {
    pub fn is_core(&self, link: usize) -> bool {
        self.core_links.binary_search(&link).is_ok()
    }

    pub fn forest_link(&self, link: usize) -> Option<&ForestLink> {
        self.forest.iter().find(|f| f.link == link)
    }
}

/// Split links into tree-like forest branches and the looped core.
///
/// Demand nodes of degree one are pruned repeatedly together with their
/// link; sources are never pruned. Whatever survives is the core.
pub fn forest_core(net: &NetworkModel) -> ForestCoreDecomposition {
    let adj = net.adjacency();
    let n_v = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut link_alive = vec![true; net.n_links()];
    let mut vertex_alive = vec![true; n_v];
    let mut subtree: Vec<Vec<usize>> = (0..n_v)
        .map(|v| match net.node_ref(v) {
            NodeRef::Demand(i) => vec![i],
            NodeRef::Source(_) => Vec::new(),
        })
        .collect();

    let mut stack: Vec<usize> = (0..net.n_nodes()).filter(|&v| degree[v] == 1).rev().collect();
    let mut forest = Vec::new();
    while let Some(v) = stack.pop() {
        if !vertex_alive[v] || degree[v] != 1 {
            continue;
        }
        let (link, parent) = adj[v]
            .iter()
            .copied()
            .find(|&(j, _)| link_alive[j])
            .expect("degree-one vertex has a live link");
        link_alive[link] = false;
        vertex_alive[v] = false;
        degree[v] = 0;
        degree[parent] -= 1;

        let into_v = net.vertex(net.links[link].to) == v;
        let mut downstream = std::mem::take(&mut subtree[v]);
        downstream.sort_unstable();
        forest.push(ForestLink {
            link,
            sign: if into_v { 1.0 } else { -1.0 },
            downstream: downstream.clone(),
        });
        subtree[parent].extend(downstream);
        if parent < net.n_nodes() && degree[parent] == 1 {
            stack.push(parent);
        }
    }
    forest.sort_by_key(|f| f.link);
    let core_links = (0..net.n_links()).filter(|&j| link_alive[j]).collect();
    ForestCoreDecomposition { core_links, forest }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::NetworkBuilder;

    #[test]
    fn star_network_is_all_forest() {
        let mut b = NetworkBuilder::new(1);
        b.source("R", 40.0);
        for k in 0..4 {
            b.junction(&format!("J{k}"), 0.0, 0.001);
            b.pipe(&format!("P{k}"), "R", &format!("J{k}"), 100.0, 0.1, 120.0);
        }
        let d = forest_core(&b.build().unwrap());
        assert!(d.core_links.is_empty());
        assert_eq!(d.forest.len(), 4);
    }

    #[test]
    fn triangle_with_pendant() {
        let net = fixtures::triangle_with_pendant();
        let d = forest_core(&net);
        let pendant = net.link_index()["P4"];
        assert_eq!(d.core_links.len(), 3);
        assert!(!d.is_core(pendant));
        assert_eq!(d.forest.len(), 1);
        assert_eq!(d.forest[0].link, pendant);
    }

    #[test]
    fn nested_branch_aggregates_downstream_nodes() {
        // R -> A -> B -> C, with the middle pipe drawn against the flow.
        let mut b = NetworkBuilder::new(1);
        b.source("R", 40.0);
        b.junction("A", 0.0, 0.001)
            .junction("B", 0.0, 0.002)
            .junction("C", 0.0, 0.003);
        b.pipe("P1", "R", "A", 100.0, 0.1, 120.0);
        b.pipe("P2", "B", "A", 100.0, 0.1, 120.0);
        b.pipe("P3", "B", "C", 100.0, 0.1, 120.0);
        let net = b.build().unwrap();
        let d = forest_core(&net);
        let out = &net.demands[0];
        let flows: Vec<f64> = d.forest.iter().map(|f| f.flow(out)).collect();
        assert!((flows[0] - 0.006).abs() < 1e-15);
        assert!((flows[1] + 0.005).abs() < 1e-15);
        assert!((flows[2] - 0.003).abs() < 1e-15);
    }

    /// A link belongs to the forest exactly when deleting it leaves one of
    /// its endpoints in a source-free, acyclic component.
    fn cuts_off_tree(net: &NetworkModel, removed: usize) -> bool {
        let adj = net.adjacency();
        let link = &net.links[removed];
        [link.from, link.to].iter().any(|&end| {
            let start = net.vertex(end);
            let mut seen = vec![false; adj.len()];
            seen[start] = true;
            let mut stack = vec![start];
            let (mut vertices, mut degree_sum, mut has_source) = (0, 0, false);
            while let Some(v) = stack.pop() {
                vertices += 1;
                has_source |= matches!(net.node_ref(v), NodeRef::Source(_));
                for &(j, w) in &adj[v] {
                    if j == removed {
                        continue;
                    }
                    degree_sum += 1;
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            !has_source && degree_sum / 2 == vertices - 1
        })
    }

    #[test]
    fn grid_is_all_core() {
        let net = fixtures::grid(5, 5);
        let d = forest_core(&net);
        assert_eq!(d.core_links.len(), net.n_links());
        for j in 0..net.n_links() {
            assert!(!cuts_off_tree(&net, j));
        }
    }

    #[test]
    fn matches_reachability_oracle_on_random_networks() {
        for seed in 0..40 {
            let net = fixtures::random_network(seed, 5 + (seed as usize % 30), 1);
            let d = forest_core(&net);
            assert_eq!(d.core_links.len() + d.forest.len(), net.n_links());
            for j in 0..net.n_links() {
                assert_eq!(!d.is_core(j), cuts_off_tree(&net, j), "seed {seed} link {j}");
            }
        }
    }
}
