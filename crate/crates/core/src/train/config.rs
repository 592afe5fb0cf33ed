use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentationSpec;
use crate::error::{invalid, Error, Result};
use crate::optim::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Supervised,
    Mtl,
    PretrainLinear,
    PretrainFinetune,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Supervised => "supervised",
            Self::Mtl => "mtl",
            Self::PretrainLinear => "pretrain_linear",
            Self::PretrainFinetune => "pretrain_finetune",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "supervised" => Ok(Self::Supervised),
            "mtl" => Ok(Self::Mtl),
            "pretrain_linear" => Ok(Self::PretrainLinear),
            "pretrain_finetune" => Ok(Self::PretrainFinetune),
            _ => Err(invalid(format!("unknown mode `{s}`"))),
        }
    }
}

/// A contrastive view: a fabricated operator or the learned generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ViewSpec {
    Fabricated(AugmentationSpec),
    /// `A6`
    Generative,
}

impl ViewSpec {
    pub fn is_generative(&self) -> bool {
        matches!(self, Self::Generative)
    }
}

impl fmt::Display for ViewSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fabricated(a) => a.fmt(f),
            Self::Generative => f.write_str("A6"),
        }
    }
}

impl FromStr for ViewSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("A6") {
            Ok(Self::Generative)
        } else {
            s.parse().map(Self::Fabricated)
        }
    }
}

impl TryFrom<String> for ViewSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ViewSpec> for String {
    fn from(v: ViewSpec) -> String {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub view1: ViewSpec,
    pub view2: ViewSpec,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub lr_model: f64,
    pub lr_generator: f64,
    pub weight_decay: f64,
    /// Weight of the contrastive term in multi-task training.
    pub lambda: f64,
    /// Weight of the contrastive term in the generator objective.
    pub beta: f64,
    pub tau_c: f64,
    pub tau_gumbel: f64,
    /// Anneal the Gumbel temperature linearly to `tau_gumbel_final`.
    pub anneal_tau_gumbel: bool,
    pub tau_gumbel_final: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub proj: usize,
    pub latent: usize,
    pub num_blocks: usize,
    pub neg_k: usize,
    pub seeds: Vec<u64>,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Maximum number of vertices contrasted per step.
    pub anchor_budget: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Mtl,
            view1: ViewSpec::Generative,
            view2: ViewSpec::Fabricated(AugmentationSpec::IncidenceRemoval(0.2)),
            epochs: 200,
            pretrain_epochs: 100,
            lr_model: 1e-3,
            lr_generator: 1e-3,
            weight_decay: 0.0,
            lambda: 1.0,
            beta: 1.0,
            tau_c: 0.5,
            tau_gumbel: 0.5,
            anneal_tau_gumbel: false,
            tau_gumbel_final: 0.1,
            dropout: 0.5,
            hidden: 64,
            proj: 64,
            latent: 32,
            num_blocks: 2,
            neg_k: 1,
            seeds: (0..10).collect(),
            train_frac: 0.1,
            val_frac: 0.1,
            anchor_budget: 4096,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {x}")))
            }
        };
        let non_negative = |name: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be non-negative, got {x}")))
            }
        };
        positive("lr_model", self.lr_model)?;
        positive("lr_generator", self.lr_generator)?;
        positive("tau_c", self.tau_c)?;
        positive("tau_gumbel", self.tau_gumbel)?;
        positive("tau_gumbel_final", self.tau_gumbel_final)?;
        non_negative("weight_decay", self.weight_decay)?;
        non_negative("lambda", self.lambda)?;
        non_negative("beta", self.beta)?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.view1.is_generative() && self.view2.is_generative() {
            return Err(invalid("at most one view may be generative (A6)"));
        }
        for v in [self.view1, self.view2] {
            if let ViewSpec::Fabricated(a) = v {
                a.validate()?;
            }
        }
        if self.hidden == 0 || self.proj == 0 || self.latent == 0 || self.num_blocks == 0 {
            return Err(invalid("hidden, proj, latent and num_blocks must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("at least one seed is required"));
        }
        if self.anchor_budget < 2 {
            return Err(invalid("anchor_budget must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.train_frac)
            || !(0.0..=1.0).contains(&self.val_frac)
            || self.train_frac + self.val_frac >= 1.0
        {
            return Err(invalid("split fractions must be non-negative with sum < 1"));
        }
        Ok(())
    }

    /// Whether an A6 view takes part in contrast under this mode.
    pub fn uses_generator(&self) -> bool {
        self.mode != Mode::Supervised && (self.view1.is_generative() || self.view2.is_generative())
    }

    pub fn model_optimizer(&self) -> AdamConfig {
        AdamConfig { lr: self.lr_model, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }

    pub fn generator_optimizer(&self) -> AdamConfig {
        AdamConfig { lr: self.lr_generator, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }

    /// Gumbel temperature at `epoch` (0-based) out of `total`.
    pub fn tau_at(&self, epoch: usize, total: usize) -> f64 {
        if !self.anneal_tau_gumbel || total < 2 {
            return self.tau_gumbel;
        }
        let f = epoch as f64 / (total - 1) as f64;
        self.tau_gumbel + (self.tau_gumbel_final - self.tau_gumbel) * f
    }
}
