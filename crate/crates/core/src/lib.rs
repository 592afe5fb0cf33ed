//! Hypergraph contrastive learning with fabricated and generative
//! augmentations.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and multi-threaded seed orchestration live in the `hypergcl` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod diffnum;
pub mod error;
pub mod generator;
pub mod hypergraph;
mod math;
pub mod model;
pub mod objectives;
pub mod optim;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
