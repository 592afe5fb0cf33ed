use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::index;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::config::{Mode, TrainConfig, ViewSpec};
use super::metrics::{accuracy, auroc, f1_binary, fairness_metrics, mean_std, predictions};
use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::generator::{
    decode_logits_on_tape, elbo_on_tape, gumbel_from_noise, gumbel_on_tape, hard_keep_ratio, logistic_noise,
    reparam_on_tape, soft_keep_ratio, standard_normal, vhgae_encode_on_tape, VhgaeParams,
};
use crate::hypergraph::{split, Hypergraph, SplitMasks};
use crate::model::{
    bind_inputs, classify, classify_on_tape, dropout_masks, encode, encode_on_tape, project_on_tape, ModelDims,
    ModelParams, ModelVars, Parameters, Structure,
};
use crate::objectives::{cross_entropy_on_tape, generator_objective_on_tape, mtl_loss_on_tape, nt_xent_on_tape};
use crate::optim::Adam;
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Contrastive-only stage of the pretraining regimes.
    Pretrain,
    Train,
}

/// One line of the per-epoch log. Fields that do not apply to the regime
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub phase: Phase,
    /// 1-based within the phase.
    pub epoch: usize,
    pub ce: Option<f64>,
    pub ntxent: Option<f64>,
    pub l_gen: Option<f64>,
    pub recon: Option<f64>,
    pub kl_v: Option<f64>,
    pub kl_e: Option<f64>,
    pub soft_keep_ratio: Option<f64>,
    pub hard_keep_ratio: Option<f64>,
    pub val_acc: Option<f64>,
    pub test_acc: Option<f64>,
}

impl EpochLog {
    fn new(phase: Phase, epoch: usize) -> Self {
        Self {
            phase,
            epoch,
            ce: None,
            ntxent: None,
            l_gen: None,
            recon: None,
            kl_v: None,
            kl_e: None,
            soft_keep_ratio: None,
            hard_keep_ratio: None,
            val_acc: None,
            test_acc: None,
        }
    }
}

/// Binary-task fairness and quality on the test vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fairness {
    pub auroc: Option<f64>,
    pub f1: f64,
    pub delta_sp: f64,
    pub delta_eo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Test accuracy (%) at the selected epoch.
    pub test_acc: f64,
    pub val_acc: Option<f64>,
    /// Training-phase epoch with the best validation accuracy (earliest on
    /// ties); 0 means the untrained model.
    pub selected_epoch: usize,
    pub logs: Vec<EpochLog>,
    pub fairness: Option<Fairness>,
    /// Parameters at the selected epoch.
    #[serde(skip)]
    pub params: Option<ModelParams>,
    #[serde(skip)]
    pub generator: Option<VhgaeParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: TrainConfig,
    /// Sorted by seed.
    pub per_seed: Vec<SeedResult>,
    pub failures: Vec<SeedFailure>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl RunResult {
    pub fn test_accuracies(&self) -> Vec<f64> {
        self.per_seed.iter().map(|r| r.test_acc).collect()
    }
}

/// Statistics of one generator update.
struct GenStats {
    l_gen: f64,
    recon: f64,
    kl_v: f64,
    kl_e: f64,
    soft: f64,
    hard: f64,
}

struct Run<'a> {
    h: &'a Hypergraph,
    structure: Structure,
    labels: &'a [usize],
    masks: &'a SplitMasks,
    cfg: &'a TrainConfig,
    seed: u64,
    params: ModelParams,
    generator: Option<VhgaeParams>,
    opt_gen: Adam,
    logs: Vec<EpochLog>,
    best: Option<(usize, Option<f64>, f64, ModelParams)>,
}

impl<'a> Run<'a> {
    fn new(h: &'a Hypergraph, masks: &'a SplitMasks, cfg: &'a TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let labels = h.labels().ok_or_else(|| invalid("training requires labels"))?;
        let n = h.num_vertices();
        if masks.train.len() != n || masks.val.len() != n || masks.test.len() != n {
            return Err(invalid("split masks do not match the vertex count"));
        }
        let dims = ModelDims {
            in_dim: h.num_features(),
            hidden: cfg.hidden,
            proj: cfg.proj,
            num_classes: h.num_classes(),
            num_blocks: cfg.num_blocks,
        };
        let params = ModelParams::init(dims, &mut seed::rng(seed, tag::INIT, 0))?;
        let generator = if cfg.uses_generator() {
            Some(VhgaeParams::init(
                h.num_features(),
                cfg.hidden,
                cfg.latent,
                cfg.num_blocks,
                &mut seed::rng(seed, tag::GENERATOR_INIT, 0),
            )?)
        } else {
            None
        };
        Ok(Self {
            h,
            structure: Structure::of(h),
            labels,
            masks,
            cfg,
            seed,
            params,
            generator,
            opt_gen: Adam::new(cfg.generator_optimizer()),
            logs: Vec::new(),
            best: None,
        })
    }

    fn dropout(&self, tape: &mut Tape, rng_tag: u64, counter: u64, copies: usize) -> Vec<Option<Vec<Var>>> {
        let rate = self.cfg.dropout;
        let mut rng = seed::rng(self.seed, rng_tag, counter);
        (0..copies)
            .map(|_| {
                (rate > 0.0).then(|| {
                    dropout_masks(self.h.num_vertices(), self.cfg.hidden, self.cfg.num_blocks, rate, &mut rng)
                        .into_iter()
                        .map(|m| tape.constant(m))
                        .collect()
                })
            })
            .collect()
    }

    /// Soft keep mask of the frozen generator for `counter`.
    fn frozen_mask(&self, counter: u64) -> Result<Vec<f64>> {
        let gen = self.generator.as_ref().ok_or_else(|| invalid("no generator"))?;
        let mut tape = Tape::new();
        let vars = gen.bind(&mut tape, false);
        let (x, w) = bind_inputs(&mut tape, self.h);
        let post = vhgae_encode_on_tape(&mut tape, &self.structure, x, w, &vars)?;
        let mut rng = seed::rng(self.seed, tag::REPARAM, counter);
        let eps_v = standard_normal(tape.value(post.mu_v).shape(), &mut rng);
        let eps_e = standard_normal(tape.value(post.mu_e).shape(), &mut rng);
        let z_v = reparam_on_tape(&mut tape, post.mu_v, post.log_sigma_v, eps_v)?;
        let z_e = reparam_on_tape(&mut tape, post.mu_e, post.log_sigma_e, eps_e)?;
        let logits = decode_logits_on_tape(&mut tape, z_v, z_e, &self.structure)?;
        let noise = logistic_noise(self.structure.num_incidences(), &mut seed::rng(self.seed, tag::GUMBEL, counter));
        gumbel_from_noise(tape.value(logits).data(), self.tau(counter), &noise)
    }

    fn tau(&self, counter: u64) -> f64 {
        let total = match self.cfg.mode {
            Mode::Mtl => self.cfg.epochs,
            _ => self.cfg.pretrain_epochs,
        };
        self.cfg.tau_at((counter / 2) as usize, total)
    }

    /// Vertex embeddings of one contrastive view.
    fn view_embedding(
        &self,
        tape: &mut Tape,
        vars: &ModelVars,
        spec: ViewSpec,
        slot: u64,
        counter: u64,
        soft: Option<Var>,
        dropout: Option<&[Var]>,
    ) -> Result<Var> {
        match spec {
            ViewSpec::Fabricated(aug) => {
                let view_seed = seed::rng(self.seed, tag::AUGMENT, 2 * counter + slot).next_u64();
                let g = aug.apply(self.h, view_seed)?;
                let (x, w) = bind_inputs(tape, &g);
                Ok(encode_on_tape(tape, &Structure::of(&g), x, w, &vars.encoder, dropout)?.0)
            }
            ViewSpec::Generative => {
                let w = match soft {
                    Some(w) => w,
                    None => tape.constant(Tensor::vector(self.frozen_mask(counter)?)),
                };
                let x = tape.constant(self.h.features().clone());
                Ok(encode_on_tape(tape, &self.structure, x, w, &vars.encoder, dropout)?.0)
            }
        }
    }

    /// NT-Xent between the projections of view 1 and view 2.
    fn contrast(&self, tape: &mut Tape, vars: &ModelVars, counter: u64, soft: Option<Var>) -> Result<Var> {
        let drop = self.dropout(tape, tag::VIEW_DROPOUT, counter, 2);
        let z1 = self.view_embedding(tape, vars, self.cfg.view1, 0, counter, soft, drop[0].as_deref())?;
        let z2 = self.view_embedding(tape, vars, self.cfg.view2, 1, counter, soft, drop[1].as_deref())?;
        let mut p1 = project_on_tape(tape, z1, &vars.projection)?;
        let mut p2 = project_on_tape(tape, z2, &vars.projection)?;
        let n = self.h.num_vertices();
        if n > self.cfg.anchor_budget {
            let mut rng = seed::rng(self.seed, tag::ANCHORS, counter);
            let rows: Arc<[usize]> = index::sample(&mut rng, n, self.cfg.anchor_budget).into_vec().into();
            p1 = tape.gather_rows(p1, rows.clone())?;
            p2 = tape.gather_rows(p2, rows)?;
        }
        nt_xent_on_tape(tape, p1, p2, self.cfg.tau_c)
    }

    fn generator_step(&mut self, epoch: usize) -> Result<GenStats> {
        let counter = 2 * epoch as u64;
        let tau = self.tau(counter);
        let mut gen = self.generator.take().ok_or_else(|| invalid("no generator"))?;
        let result = (|| {
            let mut tape = Tape::new();
            let mvars = self.params.bind(&mut tape, false);
            let gvars = gen.bind(&mut tape, true);
            let mut rng = seed::rng(self.seed, tag::REPARAM, counter);
            let terms = elbo_on_tape(&mut tape, self.h, &self.structure, &gvars, self.cfg.neg_k, &mut rng)?;
            let logits = tape.value(terms.logits).data().to_vec();
            let noise = logistic_noise(logits.len(), &mut seed::rng(self.seed, tag::GUMBEL, counter));
            let t = gumbel_on_tape(&mut tape, terms.logits, tau, noise)?;
            let objective = if self.cfg.beta > 0.0 {
                let l_cl = self.contrast(&mut tape, &mvars, counter, Some(t))?;
                generator_objective_on_tape(&mut tape, terms.l_gen, l_cl, self.cfg.beta)?
            } else {
                terms.l_gen
            };
            let grads = gradients(&tape, objective, &gvars.all)?;
            let report = terms.report(&tape);
            let stats = GenStats {
                l_gen: report.total,
                recon: report.get("recon").unwrap_or(f64::NAN),
                kl_v: report.get("kl_v").unwrap_or(f64::NAN),
                kl_e: report.get("kl_e").unwrap_or(f64::NAN),
                soft: soft_keep_ratio(&logits),
                hard: hard_keep_ratio(tape.value(t).data()),
            };
            self.opt_gen.step(gen.tensors_mut(), &grads)?;
            Ok(stats)
        })();
        self.generator = Some(gen);
        result
    }

    /// One update of the encoder, projection head and classifier.
    fn model_step(
        &mut self,
        opt: &mut Adam,
        epoch: usize,
        with_ce: bool,
        with_contrast: bool,
    ) -> Result<(Option<f64>, Option<f64>)> {
        let counter = 2 * epoch as u64 + 1;
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, true);
        let ce = if with_ce {
            let drop = self.dropout(&mut tape, tag::DROPOUT, epoch as u64, 1);
            let (x, w) = bind_inputs(&mut tape, self.h);
            let (z, _) = encode_on_tape(&mut tape, &self.structure, x, w, &vars.encoder, drop[0].as_deref())?;
            let logits = classify_on_tape(&mut tape, z, &vars.classifier)?;
            Some(cross_entropy_on_tape(&mut tape, logits, self.labels, &self.masks.train)?)
        } else {
            None
        };
        let nt = if with_contrast { Some(self.contrast(&mut tape, &vars, counter, None)?) } else { None };
        let loss = match (ce, nt) {
            (Some(c), Some(n)) => mtl_loss_on_tape(&mut tape, c, n, self.cfg.lambda)?,
            (Some(c), None) => c,
            (None, Some(n)) => n,
            (None, None) => return Err(invalid("model step without a loss")),
        };
        let grads = gradients(&tape, loss, &vars.all)?;
        let values = (ce.map(|v| tape.value(v).item()), nt.map(|v| tape.value(v).item()));
        opt.step(self.params.tensors_mut(), &grads)?;
        Ok(values)
    }

    /// Validation and test accuracy of logits computed in test mode.
    fn score(&self, logits: &Tensor) -> Result<(Option<f64>, f64)> {
        let val = if self.masks.val.iter().any(|&m| m) {
            Some(accuracy(logits, self.labels, &self.masks.val)?)
        } else {
            None
        };
        Ok((val, accuracy(logits, self.labels, &self.masks.test)?))
    }

    fn eval_logits(&self) -> Result<Tensor> {
        let (z, _) = encode(self.h, &self.params.encoder, None)?;
        classify(&z, &self.params.classifier)
    }

    /// Records a training-phase evaluation and updates the selection.
    fn record(&mut self, mut log: EpochLog, logits: &Tensor) -> Result<()> {
        let (val, test) = self.score(logits)?;
        log.val_acc = val;
        log.test_acc = Some(test);
        let better = match &self.best {
            None => true,
            Some((_, best_val, _, _)) => match (val, best_val) {
                (Some(v), Some(b)) => v > *b,
                _ => true,
            },
        };
        if better {
            self.best = Some((log.epoch, val, test, self.params.clone()));
        }
        self.logs.push(log);
        Ok(())
    }

    fn select_initial(&mut self) -> Result<()> {
        let logits = self.eval_logits()?;
        let (val, test) = self.score(&logits)?;
        self.best = Some((0, val, test, self.params.clone()));
        Ok(())
    }

    /// Contrastive and (with `with_ce`) supervised epochs.
    fn joint_epochs(&mut self, epochs: usize, phase: Phase, with_ce: bool, with_contrast: bool) -> Result<()> {
        let mut opt = Adam::new(self.cfg.model_optimizer());
        for epoch in 0..epochs {
            let mut log = EpochLog::new(phase, epoch + 1);
            if with_contrast && self.generator.is_some() {
                let s = self.generator_step(epoch)?;
                log.l_gen = Some(s.l_gen);
                log.recon = Some(s.recon);
                log.kl_v = Some(s.kl_v);
                log.kl_e = Some(s.kl_e);
                log.soft_keep_ratio = Some(s.soft);
                log.hard_keep_ratio = Some(s.hard);
            }
            let (ce, nt) = self.model_step(&mut opt, epoch, with_ce, with_contrast)?;
            log.ce = ce;
            log.ntxent = nt;
            check_finite(&log)?;
            if phase == Phase::Train {
                let logits = self.eval_logits()?;
                self.record(log, &logits)?;
            } else {
                self.logs.push(log);
            }
        }
        Ok(())
    }

    /// Trains the classifier alone on frozen test-mode embeddings.
    fn linear_epochs(&mut self, epochs: usize) -> Result<()> {
        let (z, _) = encode(self.h, &self.params.encoder, None)?;
        let mut opt = Adam::new(self.cfg.model_optimizer());
        for epoch in 0..epochs {
            let mut tape = Tape::new();
            let mut vars = Vec::new();
            let head = self.params.classifier.bind(&mut tape, true, &mut vars);
            let zc = tape.constant(z.clone());
            let logits = classify_on_tape(&mut tape, zc, &head)?;
            let ce = cross_entropy_on_tape(&mut tape, logits, self.labels, &self.masks.train)?;
            let grads = gradients(&tape, ce, &vars)?;
            let mut log = EpochLog::new(Phase::Train, epoch + 1);
            log.ce = Some(tape.value(ce).item());
            check_finite(&log)?;
            let c = &mut self.params.classifier;
            opt.step(alloc::vec![&mut c.weight, &mut c.bias], &grads)?;
            let logits = classify(&z, &self.params.classifier)?;
            self.record(log, &logits)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<SeedResult> {
        let (selected_epoch, val_acc, test_acc, params) = self.best.ok_or_else(|| invalid("no evaluation recorded"))?;
        let fairness = fairness_of(self.h, &params, &self.masks.test)?;
        Ok(SeedResult {
            seed: self.seed,
            test_acc,
            val_acc,
            selected_epoch,
            logs: self.logs,
            fairness,
            params: Some(params),
            generator: self.generator,
        })
    }
}

fn gradients(tape: &Tape, loss: Var, vars: &[Var]) -> Result<Vec<Vec<f64>>> {
    let g = tape.backward(loss)?;
    let grads: Vec<Vec<f64>> = vars.iter().map(|&v| g.get_or_zeros(tape, v)).collect();
    if grads.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(grads)
}

fn check_finite(log: &EpochLog) -> Result<()> {
    let values = [log.ce, log.ntxent, log.l_gen];
    if values.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(alloc::format!("loss at epoch {}", log.epoch)));
    }
    Ok(())
}

/// Fairness on the test vertices of a binary task with a sensitive
/// attribute; `None` when the task does not qualify or a group is empty.
fn fairness_of(h: &Hypergraph, params: &ModelParams, mask: &[bool]) -> Result<Option<Fairness>> {
    let (Some(labels), Some(sensitive)) = (h.labels(), h.sensitive()) else {
        return Ok(None);
    };
    if params.classifier.fan_out() != 2 {
        return Ok(None);
    }
    let (z, _) = encode(h, &params.encoder, None)?;
    let logits = classify(&z, &params.classifier)?;
    let preds = predictions(&logits);
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| mask[i]).collect();
    let pred: Vec<bool> = idx.iter().map(|&i| preds[i] == 1).collect();
    let truth: Vec<bool> = idx.iter().map(|&i| labels[i] == 1).collect();
    let sens: Vec<u8> = idx.iter().map(|&i| sensitive[i]).collect();
    // logit margin is a monotone transform of P(y = 1)
    let scores: Vec<f64> = idx.iter().map(|&i| logits.get(i, 1) - logits.get(i, 0)).collect();
    Ok(fairness_metrics(&pred, &truth, &sens).ok().map(|(sp, eo)| Fairness {
        auroc: auroc(&scores, &truth),
        f1: f1_binary(&pred, &truth),
        delta_sp: sp,
        delta_eo: eo,
    }))
}

fn expect_mode(cfg: &TrainConfig, allowed: &[Mode]) -> Result<()> {
    if allowed.contains(&cfg.mode) {
        Ok(())
    } else {
        Err(invalid(alloc::format!("regime does not handle mode `{}`", cfg.mode)))
    }
}

/// Encoder and classifier trained on cross-entropy over the training mask.
pub fn train_supervised(h: &Hypergraph, masks: &SplitMasks, cfg: &TrainConfig, seed: u64) -> Result<SeedResult> {
    expect_mode(cfg, &[Mode::Supervised])?;
    let mut run = Run::new(h, masks, cfg, seed)?;
    run.select_initial()?;
    run.joint_epochs(cfg.epochs, Phase::Train, true, false)?;
    run.finish()
}

/// Alternating generator and model updates on `ce + λ·ntxent`.
pub fn train_mtl(h: &Hypergraph, masks: &SplitMasks, cfg: &TrainConfig, seed: u64) -> Result<SeedResult> {
    expect_mode(cfg, &[Mode::Mtl])?;
    let mut run = Run::new(h, masks, cfg, seed)?;
    run.select_initial()?;
    run.joint_epochs(cfg.epochs, Phase::Train, true, true)?;
    run.finish()
}

/// Contrastive pretraining followed by linear probing or finetuning.
pub fn train_pretrain(h: &Hypergraph, masks: &SplitMasks, cfg: &TrainConfig, seed: u64) -> Result<SeedResult> {
    expect_mode(cfg, &[Mode::PretrainLinear, Mode::PretrainFinetune])?;
    let mut run = Run::new(h, masks, cfg, seed)?;
    run.joint_epochs(cfg.pretrain_epochs, Phase::Pretrain, false, true)?;
    run.select_initial()?;
    match cfg.mode {
        Mode::PretrainLinear => run.linear_epochs(cfg.epochs)?,
        _ => run.joint_epochs(cfg.epochs, Phase::Train, true, false)?,
    }
    run.finish()
}

/// Fresh split, fresh initialization and the configured regime for `seed`.
pub fn run_seed(h: &Hypergraph, cfg: &TrainConfig, seed: u64) -> Result<SeedResult> {
    cfg.validate()?;
    let masks = split(h, cfg.train_frac, cfg.val_frac, seed::component_seed(seed, tag::SPLIT))?;
    match cfg.mode {
        Mode::Supervised => train_supervised(h, &masks, cfg, seed),
        Mode::Mtl => train_mtl(h, &masks, cfg, seed),
        Mode::PretrainLinear | Mode::PretrainFinetune => train_pretrain(h, &masks, cfg, seed),
    }
}

/// Collects per-seed outcomes (in any order) into a summary.
pub fn aggregate(cfg: &TrainConfig, outcomes: Vec<(u64, Result<SeedResult>)>) -> RunResult {
    let mut per_seed = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(r) => per_seed.push(r),
            Err(e) => failures.push(SeedFailure { seed, error: e.to_string() }),
        }
    }
    per_seed.sort_by_key(|r| r.seed);
    failures.sort_by_key(|f| f.seed);
    let accs: Vec<f64> = per_seed.iter().map(|r| r.test_acc).collect();
    let stats = mean_std(&accs);
    RunResult { config: cfg.clone(), per_seed, failures, mean: stats.map(|s| s.0), std: stats.map(|s| s.1) }
}

/// Runs every configured seed sequentially; failures are recorded and the
/// remaining seeds still run.
pub fn run_protocol(h: &Hypergraph, cfg: &TrainConfig) -> Result<RunResult> {
    cfg.validate()?;
    let outcomes = cfg.seeds.iter().map(|&s| (s, run_seed(h, cfg, s))).collect();
    Ok(aggregate(cfg, outcomes))
}
