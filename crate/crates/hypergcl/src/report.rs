//! Per-epoch JSONL logs, run summaries, CSV tables and the run directory
//! layout.

use std::path::{Path, PathBuf};

use hypergcl_core::train::{EpochLog, Fairness, RunResult, SeedFailure, SeedResult, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{save_checkpoint, write_text};

#[derive(Serialize)]
struct LogLine<'a> {
    seed: u64,
    #[serde(flatten)]
    log: &'a EpochLog,
}

/// One JSON object per epoch, each tagged with the seed.
pub fn epoch_log_jsonl(result: &SeedResult) -> String {
    let mut out = String::new();
    for log in &result.logs {
        out.push_str(&serde_json::to_string(&LogLine { seed: result.seed, log }).expect("log serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub test_acc: f64,
    pub val_acc: Option<f64>,
    pub selected_epoch: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fairness: Option<Fairness>,
}

/// The `summary.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: TrainConfig,
    pub per_seed: Vec<SeedSummary>,
    pub failures: Vec<SeedFailure>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Summary {
    pub fn of(run: &RunResult) -> Self {
        Self {
            config: run.config.clone(),
            per_seed: run
                .per_seed
                .iter()
                .map(|r| SeedSummary {
                    seed: r.seed,
                    test_acc: r.test_acc,
                    val_acc: r.val_acc,
                    selected_epoch: r.selected_epoch,
                    fairness: r.fairness.clone(),
                })
                .collect(),
            failures: run.failures.clone(),
            mean: run.mean,
            std: run.std,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

/// Short method label such as `mtl[A6|A2:0.2]`.
pub fn method_label(cfg: &TrainConfig) -> String {
    match cfg.mode {
        hypergcl_core::train::Mode::Supervised => "supervised".into(),
        mode => format!("{mode}[{}|{}]", cfg.view1, cfg.view2),
    }
}

/// Rows are methods; columns are mean and std of test accuracy.
pub fn csv_table(rows: &[(String, &RunResult)]) -> String {
    let mut out = String::from("method,mean,std,seeds\n");
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.2}")).unwrap_or_default();
    for (name, run) in rows {
        out.push_str(&format!("{name},{},{},{}\n", fmt(run.mean), fmt(run.std), run.per_seed.len()));
    }
    out
}

/// Writes `seed_<s>.jsonl` per seed, `summary.json` and `table.csv` into
/// `dir`; with `checkpoints`, also `model_seed_<s>.json` and, when a
/// generator was trained, `generator_seed_<s>.json`.
pub fn write_run(dir: &Path, run: &RunResult, checkpoints: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for r in &run.per_seed {
        let path = dir.join(format!("seed_{}.jsonl", r.seed));
        write_text(&path, &epoch_log_jsonl(r))?;
        written.push(path);
        if checkpoints {
            if let Some(p) = &r.params {
                let path = dir.join(format!("model_seed_{}.json", r.seed));
                save_checkpoint(&path, p)?;
                written.push(path);
            }
            if let Some(g) = &r.generator {
                let path = dir.join(format!("generator_seed_{}.json", r.seed));
                save_checkpoint(&path, g)?;
                written.push(path);
            }
        }
    }
    let summary = dir.join("summary.json");
    write_text(&summary, &Summary::of(run).to_json())?;
    written.push(summary);
    let table = dir.join("table.csv");
    write_text(&table, &csv_table(&[(method_label(&run.config), run)]))?;
    written.push(table);
    Ok(written)
}
