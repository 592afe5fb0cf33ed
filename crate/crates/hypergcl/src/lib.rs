//! File formats, run reports, parallel seed orchestration and the command
//! line for [`hypergcl_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

pub use error::{DataError, Result};
pub use hypergcl_core;
