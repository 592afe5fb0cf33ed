use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Hypergraph;
use crate::error::{invalid, Result};
use crate::math;
use crate::seed;

/// Disjoint train/validation/test vertex masks covering every vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn indices(mask: &[bool]) -> Vec<usize> {
        mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&x| x).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }
}

/// Shuffles vertex ids and takes `floor(train_frac·|V|)` for training, the
/// next `floor(val_frac·|V|)` for validation and the rest for testing.
pub fn split(h: &Hypergraph, train_frac: f64, val_frac: f64, seed: u64) -> Result<SplitMasks> {
    if h.labels().is_none() {
        return Err(invalid("split requires labels"));
    }
    if !(0.0..=1.0).contains(&train_frac) || !(0.0..=1.0).contains(&val_frac) || train_frac + val_frac >= 1.0 {
        return Err(invalid(alloc::format!(
            "split fractions must be non-negative with sum < 1, got {train_frac} + {val_frac}"
        )));
    }
    let n = h.num_vertices();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::plain(seed));
    let n_train = math::floor(train_frac * n as f64) as usize;
    let n_val = math::floor(val_frac * n as f64) as usize;
    let mut masks = SplitMasks { train: vec![false; n], val: vec![false; n], test: vec![false; n] };
    for (rank, &v) in order.iter().enumerate() {
        if rank < n_train {
            masks.train[v] = true;
        } else if rank < n_train + n_val {
            masks.val[v] = true;
        } else {
            masks.test[v] = true;
        }
    }
    Ok(masks)
}
