//! Seed derivation.
//!
//! Every random component draws from its own ChaCha8 generator seeded with
//! `root ^ tag`, where `tag` identifies the component, and selects the
//! ChaCha stream `counter` (typically the epoch, or a sub-step index). Two
//! components never share a stream, so e.g. adding a contrastive view does
//! not perturb dropout masks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Component tags (ASCII mnemonics).
pub mod tag {
    pub const SPLIT: u64 = 0x53504c4954; // "SPLIT"
    pub const INIT: u64 = 0x494e4954; // "INIT"
    pub const GENERATOR_INIT: u64 = 0x47494e4954; // "GINIT"
    pub const AUGMENT: u64 = 0x4155474d; // "AUGM"
    pub const GUMBEL: u64 = 0x47554d42; // "GUMB"
    pub const REPARAM: u64 = 0x52455041; // "REPA"
    pub const NEGATIVES: u64 = 0x4e454753; // "NEGS"
    pub const DROPOUT: u64 = 0x44524f50; // "DROP"
    pub const VIEW_DROPOUT: u64 = 0x5644524f; // "VDRO"
    pub const ANCHORS: u64 = 0x414e4348; // "ANCH"
    pub const ATTACK: u64 = 0x41545441; // "ATTA"
}

pub fn component_seed(root: u64, tag: u64) -> u64 {
    root ^ tag
}

pub fn rng(root: u64, tag: u64, counter: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(component_seed(root, tag));
    r.set_stream(counter);
    r
}

/// Generator for a plain user-supplied seed (augmentation operators,
/// synthetic data, splits).
pub fn plain(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
