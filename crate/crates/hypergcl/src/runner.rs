use hypergcl_core::hypergraph::Hypergraph;
use hypergcl_core::train::{aggregate, run_protocol, run_seed, RunResult, TrainConfig};
use hypergcl_core::Result;
use rayon::prelude::*;

/// Runs every configured seed on up to `threads` worker threads. Results
/// do not depend on the thread count.
pub fn run_parallel(h: &Hypergraph, cfg: &TrainConfig, threads: usize) -> Result<RunResult> {
    if threads <= 1 {
        return run_protocol(h, cfg);
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| hypergcl_core::Error::InvalidArgument(e.to_string()))?;
    let outcomes = pool.install(|| cfg.seeds.par_iter().map(|&s| (s, run_seed(h, cfg, s))).collect());
    Ok(aggregate(cfg, outcomes))
}
