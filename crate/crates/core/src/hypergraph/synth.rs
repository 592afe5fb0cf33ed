use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Hypergraph;
use crate::diffnum::Tensor;
use crate::error::{invalid, Result};
use crate::seed;

/// Planted-partition generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_vertices: usize,
    pub num_classes: usize,
    pub num_hyperedges: usize,
    /// Inclusive `(min, max)` hyperedge size.
    pub hyperedge_size_range: (usize, usize),
    /// Probability that a hyperedge is drawn from a single class.
    pub intra_class_probability: f64,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian noise added to every feature.
    pub feature_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_vertices: 400,
            num_classes: 4,
            num_hyperedges: 120,
            hyperedge_size_range: (3, 6),
            intra_class_probability: 0.9,
            feature_dim: 16,
            feature_noise: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.hyperedge_size_range;
        if lo < 2 || hi < lo {
            return Err(invalid("hyperedge size range must satisfy 2 <= min <= max"));
        }
        if hi > self.num_vertices {
            return Err(invalid("maximum hyperedge size exceeds the number of vertices"));
        }
        if !(self.intra_class_probability > 0.0 && self.intra_class_probability <= 1.0) {
            return Err(invalid("intra-class probability must lie in (0, 1]"));
        }
        if self.num_classes == 0 || self.feature_dim == 0 {
            return Err(invalid("need at least one class and one feature dimension"));
        }
        if self.num_hyperedges == 0 {
            return Err(invalid("a synthetic hypergraph needs at least one hyperedge"));
        }
        if !(self.feature_noise >= 0.0) {
            return Err(invalid("feature noise must be non-negative"));
        }
        Ok(())
    }
}

/// Samples a labelled hypergraph with planted class structure.
///
/// Labels are uniform. A hyperedge picks its size uniformly from the range;
/// with probability `q` all members come from one uniformly chosen class
/// (drawn among classes holding enough vertices), otherwise from all
/// vertices. Features are the class one-hot (column `class mod
/// feature_dim`) plus isotropic Gaussian noise.
pub fn synth_hypergraph(cfg: &SynthConfig, seed: u64) -> Result<Hypergraph> {
    cfg.validate()?;
    let mut rng = seed::plain(seed);
    let n = cfg.num_vertices;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..cfg.num_classes)).collect();
    let mut by_class = vec![Vec::new(); cfg.num_classes];
    for (v, &c) in labels.iter().enumerate() {
        by_class[c].push(v);
    }

    let (lo, hi) = cfg.hyperedge_size_range;
    let mut hyperedges = Vec::with_capacity(cfg.num_hyperedges);
    for _ in 0..cfg.num_hyperedges {
        let size = rng.random_range(lo..=hi);
        let intra = rng.random_bool(cfg.intra_class_probability);
        let pool: Option<&Vec<usize>> = if intra {
            let eligible: Vec<&Vec<usize>> = by_class.iter().filter(|c| c.len() >= size).collect();
            if eligible.is_empty() {
                None
            } else {
                Some(eligible[rng.random_range(0..eligible.len())])
            }
        } else {
            None
        };
        let members: Vec<usize> = match pool {
            Some(p) => index::sample(&mut rng, p.len(), size).iter().map(|i| p[i]).collect(),
            None => index::sample(&mut rng, n, size).into_vec(),
        };
        hyperedges.push(members);
    }

    let noise = Normal::new(0.0, cfg.feature_noise).map_err(|_| invalid("bad feature noise"))?;
    let f = cfg.feature_dim;
    let mut data = vec![0.0; n * f];
    for (v, &c) in labels.iter().enumerate() {
        let row = &mut data[v * f..(v + 1) * f];
        row[c % f] = 1.0;
        for x in row.iter_mut() {
            *x += noise.sample(&mut rng);
        }
    }
    let features = Tensor::matrix(n, f, data)?;
    Hypergraph::from_hyperedges(n, &hyperedges, features)?.with_labels(labels)
}
