//! Training regimes, evaluation, fairness metrics, the random-perturbation
//! probe and multi-seed orchestration.

mod config;
mod metrics;
mod runner;

pub use config::{Mode, TrainConfig, ViewSpec};
pub use metrics::{
    accuracy, auroc, evaluate, f1_binary, fairness_metrics, mean_std, predictions, random_perturb_attack,
};
pub use runner::{
    aggregate, run_protocol, run_seed, train_mtl, train_pretrain, train_supervised, EpochLog, Fairness, Phase,
    RunResult, SeedFailure, SeedResult,
};

#[cfg(test)]
mod tests;
