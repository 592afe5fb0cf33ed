use alloc::collections::BTreeSet;
use alloc::vec;

use serde::{Deserialize, Serialize};

use super::Hypergraph;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homophily {
    /// Mean same-label pair fraction over hyperedges with ≥ 2 members.
    pub edge: f64,
    /// Mean fraction of distinct co-members sharing the vertex label, over
    /// vertices with ≥ 1 co-member.
    pub node: f64,
}

pub fn homophily(h: &Hypergraph) -> Result<Homophily> {
    let labels = h.labels().ok_or_else(|| invalid("homophily requires labels"))?;
    let members = h.hyperedges();

    let mut edge_sum = 0.0;
    let mut edge_count = 0usize;
    let mut neighbours = vec![BTreeSet::new(); h.num_vertices()];
    for m in members.iter().filter(|m| m.len() >= 2) {
        let mut same = 0usize;
        let mut total = 0usize;
        for (i, &a) in m.iter().enumerate() {
            for &b in &m[i + 1..] {
                total += 1;
                if labels[a] == labels[b] {
                    same += 1;
                }
                neighbours[a].insert(b);
                neighbours[b].insert(a);
            }
        }
        edge_sum += same as f64 / total as f64;
        edge_count += 1;
    }
    if edge_count == 0 {
        return Err(invalid("homophily needs at least one hyperedge with two or more vertices"));
    }

    let mut node_sum = 0.0;
    let mut node_count = 0usize;
    for (v, nb) in neighbours.iter().enumerate() {
        if nb.is_empty() {
            continue;
        }
        let same = nb.iter().filter(|&&u| labels[u] == labels[v]).count();
        node_sum += same as f64 / nb.len() as f64;
        node_count += 1;
    }
    Ok(Homophily { edge: edge_sum / edge_count as f64, node: node_sum / node_count as f64 })
}
