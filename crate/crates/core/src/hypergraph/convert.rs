use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{Hypergraph, Incidence};
use crate::diffnum::Tensor;
use crate::error::Result;

/// Bipartite rewriting: left nodes are vertices, right nodes are
/// hyperedges, one edge per incidence. Lossless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteView {
    pub num_left: usize,
    pub num_right: usize,
    pub edges: Vec<(usize, usize)>,
}

pub fn to_bipartite(h: &Hypergraph) -> BipartiteView {
    BipartiteView {
        num_left: h.num_vertices(),
        num_right: h.num_hyperedges(),
        edges: h.incidences().iter().map(|i| (i.vertex, i.hyperedge)).collect(),
    }
}

impl BipartiteView {
    /// Reads the bipartite graph back as a hypergraph over `features`.
    pub fn to_hypergraph(&self, features: Tensor) -> Result<Hypergraph> {
        let incidences = self.edges.iter().map(|&(v, e)| Incidence::new(v, e)).collect();
        Hypergraph::new(self.num_left, self.num_right, features, incidences)
    }
}

/// Replaces every hyperedge by the 2-element hyperedges of all its vertex
/// pairs. Pairs shared by several hyperedges appear once; output pairs are
/// in lexicographic order. Incidence weights are not carried over.
pub fn clique_expand(h: &Hypergraph) -> Result<Hypergraph> {
    let mut pairs = BTreeSet::new();
    for members in h.hyperedges() {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    let mut incidences = Vec::with_capacity(pairs.len() * 2);
    for (e, (a, b)) in pairs.iter().enumerate() {
        incidences.push(Incidence::new(*a, e));
        incidences.push(Incidence::new(*b, e));
    }
    let mut out = Hypergraph::new(h.num_vertices(), pairs.len(), h.features().clone(), incidences)?;
    if let Some(l) = h.labels() {
        out = out.with_labels(l.to_vec())?;
    }
    if let Some(s) = h.sensitive() {
        out = out.with_sensitive(s.to_vec())?;
    }
    Ok(out)
}
