//! Hypergraph data model and the structural utilities built on it.

mod convert;
mod split;
mod stats;
mod synth;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::diffnum::Tensor;
use crate::error::{Error, Result};

pub use convert::{clique_expand, to_bipartite, BipartiteView};
pub use split::{split, SplitMasks};
pub use stats::{homophily, Homophily};
pub use synth::{synth_hypergraph, SynthConfig};

/// A `(vertex, hyperedge)` membership pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Incidence {
    pub vertex: usize,
    pub hyperedge: usize,
}

impl Incidence {
    pub fn new(vertex: usize, hyperedge: usize) -> Self {
        Self { vertex, hyperedge }
    }
}

/// Vertices with features plus hyperedges stored as incidence pairs.
///
/// Invariants (checked on construction): indices in range, no duplicate
/// pair, no empty hyperedge, weights in `[0, 1]`, one label and one
/// sensitive value per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypergraph {
    num_vertices: usize,
    num_hyperedges: usize,
    features: Tensor,
    incidences: Vec<Incidence>,
    incidence_weights: Option<Vec<f64>>,
    labels: Option<Vec<usize>>,
    sensitive: Option<Vec<u8>>,
}

impl Hypergraph {
    pub fn new(
        num_vertices: usize,
        num_hyperedges: usize,
        features: Tensor,
        incidences: Vec<Incidence>,
    ) -> Result<Self> {
        let h = Self {
            num_vertices,
            num_hyperedges,
            features,
            incidences,
            incidence_weights: None,
            labels: None,
            sensitive: None,
        };
        h.validate()?;
        Ok(h)
    }

    /// Builds from member lists; repeated vertices inside one hyperedge are
    /// collapsed.
    pub fn from_hyperedges(num_vertices: usize, hyperedges: &[Vec<usize>], features: Tensor) -> Result<Self> {
        let mut incidences = Vec::new();
        for (e, members) in hyperedges.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &v in members {
                if seen.insert(v) {
                    incidences.push(Incidence::new(v, e));
                }
            }
        }
        Self::new(num_vertices, hyperedges.len(), features, incidences)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        self.labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn with_sensitive(mut self, sensitive: Vec<u8>) -> Result<Self> {
        self.sensitive = Some(sensitive);
        self.validate()?;
        Ok(self)
    }

    pub fn with_incidence_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.incidence_weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        self.features = features;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidHypergraph(msg));
        let fs = self.features.shape();
        if fs.len() != 2 || fs[0] != self.num_vertices {
            return bad(format!("feature matrix shape {fs:?} does not match {} vertices", self.num_vertices));
        }
        let mut seen = BTreeSet::new();
        let mut covered = vec![false; self.num_hyperedges];
        for inc in &self.incidences {
            if inc.vertex >= self.num_vertices {
                return bad(format!("vertex index {} out of range (|V| = {})", inc.vertex, self.num_vertices));
            }
            if inc.hyperedge >= self.num_hyperedges {
                return bad(format!("hyperedge index {} out of range (|E| = {})", inc.hyperedge, self.num_hyperedges));
            }
            if !seen.insert(*inc) {
                return bad(format!("duplicate incidence ({}, {})", inc.vertex, inc.hyperedge));
            }
            covered[inc.hyperedge] = true;
        }
        if let Some(e) = covered.iter().position(|c| !c) {
            return bad(format!("hyperedge {e} has no members"));
        }
        if let Some(w) = &self.incidence_weights {
            if w.len() != self.incidences.len() {
                return bad(format!("{} incidence weights for {} incidences", w.len(), self.incidences.len()));
            }
            if let Some(x) = w.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return bad(format!("incidence weight {x} outside [0, 1]"));
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != self.num_vertices {
                return bad(format!("{} labels for {} vertices", l.len(), self.num_vertices));
            }
        }
        if let Some(s) = &self.sensitive {
            if s.len() != self.num_vertices {
                return bad(format!("{} sensitive values for {} vertices", s.len(), self.num_vertices));
            }
            if s.iter().any(|&x| x > 1) {
                return bad("sensitive attribute must be 0/1".into());
            }
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_hyperedges(&self) -> usize {
        self.num_hyperedges
    }

    pub fn num_features(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn incidences(&self) -> &[Incidence] {
        &self.incidences
    }

    pub fn incidence_weights(&self) -> Option<&[f64]> {
        self.incidence_weights.as_deref()
    }

    /// Per-incidence weights, all ones when none are attached.
    pub fn weights_or_ones(&self) -> Vec<f64> {
        self.incidence_weights.clone().unwrap_or_else(|| vec![1.0; self.incidences.len()])
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn sensitive(&self) -> Option<&[u8]> {
        self.sensitive.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |m| m + 1)
    }

    /// Member lists in incidence order.
    pub fn hyperedges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_hyperedges];
        for inc in &self.incidences {
            out[inc.hyperedge].push(inc.vertex);
        }
        out
    }

    /// Canonical incidence set, independent of storage order.
    pub fn incidence_set(&self) -> BTreeSet<Incidence> {
        self.incidences.iter().copied().collect()
    }

    /// Same vertices and hyperedge slots, incidences and features replaced.
    ///
    /// Hyperedges left without members are dropped and the survivors are
    /// renumbered densely in their original order. Weights are carried along
    /// when `weights` is given.
    pub(crate) fn rebuild(
        &self,
        incidences: Vec<Incidence>,
        weights: Option<Vec<f64>>,
        features: Tensor,
    ) -> Result<Self> {
        let mut remap = vec![usize::MAX; self.num_hyperedges];
        for inc in &incidences {
            remap[inc.hyperedge] = 0;
        }
        let mut next = 0;
        for slot in remap.iter_mut().filter(|s| **s == 0) {
            *slot = next;
            next += 1;
        }
        let incidences = incidences.into_iter().map(|i| Incidence::new(i.vertex, remap[i.hyperedge])).collect();
        let h = Self {
            num_vertices: self.num_vertices,
            num_hyperedges: next,
            features,
            incidences,
            incidence_weights: weights,
            labels: self.labels.clone(),
            sensitive: self.sensitive.clone(),
        };
        h.validate()?;
        Ok(h)
    }

    /// Structural equality: vertex count, hyperedge count and incidence set.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.num_vertices == other.num_vertices
            && self.num_hyperedges == other.num_hyperedges
            && self.incidence_set() == other.incidence_set()
    }
}

#[cfg(test)]
mod tests;
