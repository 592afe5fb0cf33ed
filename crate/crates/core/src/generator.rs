//! Variational hypergraph auto-encoder producing learned augmented views.
//!
//! Two encoder stacks produce the Gaussian posterior over vertex and
//! hyperedge latents. An inner-product decoder scores incidence pairs, and a
//! binary-concrete relaxation turns the scores of existing incidences into a
//! soft keep mask that the contrastive encoder consumes as incidence weights.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::hypergraph::{Hypergraph, Incidence};
use crate::math;
use crate::model::{
    bind_inputs, encode_on_tape, EncoderParams, EncoderVars, Linear, LinearVars, NamedReader, Parameters, Structure,
};
use crate::objectives::LossReport;
use crate::seed::{self, Rng as SeedRng};

/// Bound applied to the predicted log standard deviation.
pub const LOG_SIGMA_BOUND: f64 = 10.0;

/// Gumbel masks are squeezed into `[GUMBEL_FLOOR, 1 − GUMBEL_FLOOR]` so they
/// stay strictly inside the unit interval in floating point.
pub const GUMBEL_FLOOR: f64 = 1e-12;

/// Pair budget below which reconstruction enumerates every non-incident pair.
pub const FULL_ENUMERATION_LIMIT: usize = 10_000_000;

/// One posterior stack: an encoder trunk plus linear read-outs for vertex
/// and hyperedge latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStack {
    pub encoder: EncoderParams,
    pub vertex_head: Linear,
    pub edge_head: Linear,
}

impl GaussianStack {
    fn init(in_dim: usize, hidden: usize, latent: usize, blocks: usize, rng: &mut SeedRng) -> Self {
        Self {
            encoder: EncoderParams::init(in_dim, hidden, blocks, rng),
            vertex_head: Linear::init(hidden, latent, rng),
            edge_head: Linear::init(hidden, latent, rng),
        }
    }

    fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.encoder.named_into(&format!("{prefix}.encoder"), out);
        self.vertex_head.named(&format!("{prefix}.vertex_head"), out);
        self.edge_head.named(&format!("{prefix}.edge_head"), out);
    }

    fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.encoder.tensors_mut_into(out);
        self.vertex_head.tensors_mut(out);
        self.edge_head.tensors_mut(out);
    }

    fn bind(&self, tape: &mut Tape, trainable: bool, vars: &mut Vec<Var>) -> StackVars {
        StackVars {
            encoder: self.encoder.bind(tape, trainable, vars),
            vertex_head: self.vertex_head.bind(tape, trainable, vars),
            edge_head: self.edge_head.bind(tape, trainable, vars),
        }
    }

    fn read(r: &mut NamedReader<'_>, prefix: &str) -> Result<Self> {
        Ok(Self {
            encoder: r.encoder(&format!("{prefix}.encoder"))?,
            vertex_head: r.linear(&format!("{prefix}.vertex_head"))?,
            edge_head: r.linear(&format!("{prefix}.edge_head"))?,
        })
    }
}

/// Generator parameters: posterior mean and log-std stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VhgaeParams {
    pub mu: GaussianStack,
    pub log_sigma: GaussianStack,
}

impl VhgaeParams {
    pub fn init(in_dim: usize, hidden: usize, latent: usize, num_blocks: usize, rng: &mut SeedRng) -> Result<Self> {
        if hidden == 0 || latent == 0 || num_blocks == 0 {
            return Err(invalid(format!(
                "invalid generator dimensions: hidden {hidden}, latent {latent}, blocks {num_blocks}"
            )));
        }
        Ok(Self {
            mu: GaussianStack::init(in_dim, hidden, latent, num_blocks, rng),
            log_sigma: GaussianStack::init(in_dim, hidden, latent, num_blocks, rng),
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.vertex_head.fan_out()
    }

    pub fn in_dim(&self) -> usize {
        self.mu.encoder.in_dim()
    }

    /// Same shapes with every entry set to zero.
    pub fn zeroed(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        out
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> VhgaeVars {
        let mut all = Vec::new();
        let mu = self.mu.bind(tape, trainable, &mut all);
        let log_sigma = self.log_sigma.bind(tape, trainable, &mut all);
        VhgaeVars { mu, log_sigma, all }
    }

    pub fn from_named(entries: &[(String, Tensor)]) -> Result<Self> {
        let mut r = NamedReader::new(entries);
        let mu = GaussianStack::read(&mut r, "mu")?;
        let log_sigma = GaussianStack::read(&mut r, "log_sigma")?;
        r.finish()?;
        if mu.vertex_head.fan_out() != log_sigma.vertex_head.fan_out()
            || mu.encoder.in_dim() != log_sigma.encoder.in_dim()
        {
            return Err(invalid("mean and log-std stacks disagree on dimensions"));
        }
        Ok(Self { mu, log_sigma })
    }
}

impl Parameters for VhgaeParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.mu.named("mu", &mut out);
        self.log_sigma.named("log_sigma", &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        self.mu.tensors_mut(&mut out);
        self.log_sigma.tensors_mut(&mut out);
        out
    }
}

#[derive(Debug, Clone)]
pub struct StackVars {
    pub encoder: EncoderVars,
    pub vertex_head: LinearVars,
    pub edge_head: LinearVars,
}

#[derive(Debug, Clone)]
pub struct VhgaeVars {
    pub mu: StackVars,
    pub log_sigma: StackVars,
    /// Every bound tensor, in [`Parameters::named`] order.
    pub all: Vec<Var>,
}

/// Posterior parameters on a tape.
#[derive(Debug, Clone, Copy)]
pub struct Posterior {
    pub mu_v: Var,
    pub log_sigma_v: Var,
    pub mu_e: Var,
    pub log_sigma_e: Var,
}

/// A reparameterized latent draw together with the noise that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSample {
    pub z_v: Tensor,
    pub z_e: Tensor,
    pub eps_v: Tensor,
    pub eps_e: Tensor,
}

/// `clamp(x, −b, b) = relu(x + b) − relu(x − b) − b`.
fn clamp_on_tape(tape: &mut Tape, x: Var, bound: f64) -> Result<Var> {
    let b = tape.constant(Tensor::scalar(bound));
    let up = tape.add(x, b)?;
    let up = tape.relu(up)?;
    let down = tape.sub(x, b)?;
    let down = tape.relu(down)?;
    let diff = tape.sub(up, down)?;
    tape.sub(diff, b)
}

fn run_stack(tape: &mut Tape, structure: &Structure, x: Var, w: Var, stack: &StackVars) -> Result<(Var, Var)> {
    let (zv, ze) = encode_on_tape(tape, structure, x, w, &stack.encoder, None)?;
    Ok((stack.vertex_head.forward(tape, zv)?, stack.edge_head.forward(tape, ze)?))
}

pub fn vhgae_encode_on_tape(
    tape: &mut Tape,
    structure: &Structure,
    features: Var,
    weights: Var,
    vars: &VhgaeVars,
) -> Result<Posterior> {
    if structure.num_hyperedges == 0 {
        return Err(Error::InvalidHypergraph("generative view needs at least one hyperedge".into()));
    }
    let (mu_v, mu_e) = run_stack(tape, structure, features, weights, &vars.mu)?;
    let (ls_v, ls_e) = run_stack(tape, structure, features, weights, &vars.log_sigma)?;
    Ok(Posterior {
        mu_v,
        mu_e,
        log_sigma_v: clamp_on_tape(tape, ls_v, LOG_SIGMA_BOUND)?,
        log_sigma_e: clamp_on_tape(tape, ls_e, LOG_SIGMA_BOUND)?,
    })
}

/// `(μ_V, logσ_V, μ_E, logσ_E)`.
pub fn vhgae_encode(h: &Hypergraph, params: &VhgaeParams) -> Result<(Tensor, Tensor, Tensor, Tensor)> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let (x, w) = bind_inputs(&mut tape, h);
    let p = vhgae_encode_on_tape(&mut tape, &Structure::of(h), x, w, &vars)?;
    Ok((
        tape.value(p.mu_v).clone(),
        tape.value(p.log_sigma_v).clone(),
        tape.value(p.mu_e).clone(),
        tape.value(p.log_sigma_e).clone(),
    ))
}

pub fn standard_normal(shape: &[usize], rng: &mut SeedRng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).expect("consistent shape")
}

/// `z = μ + exp(logσ)∘ε` with externally supplied `ε`.
pub fn reparam_on_tape(tape: &mut Tape, mu: Var, log_sigma: Var, eps: Tensor) -> Result<Var> {
    let eps = tape.constant(eps);
    let sigma = tape.exp(log_sigma)?;
    let noise = tape.mul(sigma, eps)?;
    tape.add(mu, noise)
}

/// Returns `(z, ε)`.
pub fn reparam_sample(mu: &Tensor, log_sigma: &Tensor, seed: u64) -> Result<(Tensor, Tensor)> {
    if mu.shape() != log_sigma.shape() {
        return Err(Error::Shape {
            op: "reparam_sample",
            shapes: vec![mu.shape().to_vec(), log_sigma.shape().to_vec()],
        });
    }
    let eps = standard_normal(mu.shape(), &mut seed::plain(seed));
    let mut tape = Tape::new();
    let m = tape.constant(mu.clone());
    let s = tape.constant(log_sigma.clone());
    let z = reparam_on_tape(&mut tape, m, s, eps.clone())?;
    Ok((tape.value(z).clone(), eps))
}

/// Inner products `z_V[v]·z_E[e]` for the given pairs, as a vector.
pub fn pair_logits_on_tape(
    tape: &mut Tape,
    z_v: Var,
    z_e: Var,
    vertices: Arc<[usize]>,
    edges: Arc<[usize]>,
) -> Result<Var> {
    let k = vertices.len();
    let a = tape.gather_rows(z_v, vertices)?;
    let b = tape.gather_rows(z_e, edges)?;
    let prod = tape.mul(a, b)?;
    let sums = tape.row_sums(prod)?;
    tape.reshape(sums, &[k])
}

pub fn decode_logits_on_tape(tape: &mut Tape, z_v: Var, z_e: Var, structure: &Structure) -> Result<Var> {
    pair_logits_on_tape(tape, z_v, z_e, structure.vertex_rows(), structure.edge_rows())
}

/// One logit per incidence; `sigmoid` of it is the edge probability.
pub fn decode_logits(z_v: &Tensor, z_e: &Tensor, incidences: &[Incidence]) -> Result<Vec<f64>> {
    let (n, m) = (z_v.shape()[0], z_e.shape()[0]);
    if incidences.iter().any(|i| i.vertex >= n || i.hyperedge >= m) {
        return Err(invalid("incidence index out of range for latent matrices"));
    }
    let mut tape = Tape::new();
    let a = tape.constant(z_v.clone());
    let b = tape.constant(z_e.clone());
    let vs: Arc<[usize]> = incidences.iter().map(|i| i.vertex).collect();
    let es: Arc<[usize]> = incidences.iter().map(|i| i.hyperedge).collect();
    let w = pair_logits_on_tape(&mut tape, a, b, vs, es)?;
    Ok(tape.value(w).data().to_vec())
}

/// Mean of `−log σ(sign·w)` over a logit vector or matrix, optionally
/// restricted by a 0/1 mask with `count` ones.
fn mean_bce(tape: &mut Tape, logits: Var, positive: bool, mask: Option<(Var, usize)>) -> Result<Var> {
    let s = if positive { logits } else { tape.scale(logits, -1.0)? };
    let p = tape.sigmoid(s)?;
    let lp = tape.log(p)?;
    let (lp, count) = match mask {
        Some((m, count)) => (tape.mul(lp, m)?, count),
        None => (lp, tape.value(lp).len()),
    };
    let total = tape.sum(lp)?;
    tape.scale(total, -1.0 / count.max(1) as f64)
}

/// Balanced reconstruction BCE: `(pos + k·neg)/(1 + k)` where `pos` is the
/// mean over incidences and `neg` the mean over non-incident pairs, either
/// enumerated or sampled `k` per positive.
pub fn reconstruction_on_tape(
    tape: &mut Tape,
    h: &Hypergraph,
    structure: &Structure,
    z_v: Var,
    z_e: Var,
    neg_k: usize,
    rng: &mut SeedRng,
) -> Result<Var> {
    reconstruction_with_limit(tape, h, structure, z_v, z_e, neg_k, rng, FULL_ENUMERATION_LIMIT)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn reconstruction_with_limit(
    tape: &mut Tape,
    h: &Hypergraph,
    structure: &Structure,
    z_v: Var,
    z_e: Var,
    neg_k: usize,
    rng: &mut SeedRng,
    limit: usize,
) -> Result<Var> {
    let (n, m) = (h.num_vertices(), h.num_hyperedges());
    let positives = decode_logits_on_tape(tape, z_v, z_e, structure)?;
    let pos = mean_bce(tape, positives, true, None)?;
    let num_neg = n * m - h.incidences().len();
    if neg_k == 0 || num_neg == 0 {
        return Ok(pos);
    }
    let neg = if n * m <= limit {
        let mut mask = vec![1.0; n * m];
        for i in h.incidences() {
            mask[i.vertex * m + i.hyperedge] = 0.0;
        }
        let mask = tape.constant(Tensor::matrix(n, m, mask)?);
        let zt = tape.transpose(z_e)?;
        let dense = tape.matmul(z_v, zt)?;
        mean_bce(tape, dense, false, Some((mask, num_neg)))?
    } else {
        let (vs, es) = sample_negatives(h, neg_k * h.incidences().len(), rng);
        let logits = pair_logits_on_tape(tape, z_v, z_e, vs.into(), es.into())?;
        mean_bce(tape, logits, false, None)?
    };
    let k = neg_k as f64;
    let weighted = tape.scale(neg, k)?;
    let sum = tape.add(pos, weighted)?;
    tape.scale(sum, 1.0 / (1.0 + k))
}

/// Uniform non-incident `(vertex, hyperedge)` pairs by rejection.
pub fn sample_negatives(h: &Hypergraph, count: usize, rng: &mut SeedRng) -> (Vec<usize>, Vec<usize>) {
    let taken = h.incidence_set();
    let (n, m) = (h.num_vertices(), h.num_hyperedges());
    let mut vs = Vec::with_capacity(count);
    let mut es = Vec::with_capacity(count);
    if taken.len() == n * m {
        return (vs, es);
    }
    while vs.len() < count {
        let v = rng.random_range(0..n);
        let e = rng.random_range(0..m);
        if !taken.contains(&Incidence::new(v, e)) {
            vs.push(v);
            es.push(e);
        }
    }
    (vs, es)
}

pub fn reconstruction_loss(h: &Hypergraph, z_v: &Tensor, z_e: &Tensor, neg_k: usize, seed: u64) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(z_v.clone());
    let b = tape.constant(z_e.clone());
    let loss = reconstruction_on_tape(&mut tape, h, &Structure::of(h), a, b, neg_k, &mut seed::plain(seed))?;
    Ok(tape.value(loss).item())
}

/// Mean over rows of `Σ_d ½(μ² + σ² − 1 − 2logσ)`.
pub fn kl_on_tape(tape: &mut Tape, mu: Var, log_sigma: Var) -> Result<Var> {
    let (sm, ss) = (tape.value(mu).shape().to_vec(), tape.value(log_sigma).shape().to_vec());
    if sm != ss || sm.len() != 2 {
        return Err(Error::Shape { op: "kl_gauss", shapes: vec![sm, ss] });
    }
    let (rows, len) = (sm[0], sm[0] * sm[1]);
    let mu2 = tape.square(mu)?;
    let two_ls = tape.scale(log_sigma, 2.0)?;
    let var = tape.exp(two_ls)?;
    let a = tape.add(mu2, var)?;
    let a = tape.sub(a, two_ls)?;
    let total = tape.sum(a)?;
    let ones = tape.constant(Tensor::scalar(len as f64));
    let total = tape.sub(total, ones)?;
    tape.scale(total, 0.5 / rows.max(1) as f64)
}

pub fn kl_gauss(mu: &Tensor, log_sigma: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let m = tape.constant(mu.clone());
    let s = tape.constant(log_sigma.clone());
    let kl = kl_on_tape(&mut tape, m, s)?;
    Ok(tape.value(kl).item())
}

/// Every term of the negative ELBO on one tape.
#[derive(Debug, Clone)]
pub struct ElboTerms {
    pub l_gen: Var,
    pub recon: Var,
    pub kl_v: Var,
    pub kl_e: Var,
    pub z_v: Var,
    pub z_e: Var,
    /// Decoder logits of the existing incidences.
    pub logits: Var,
    pub eps_v: Tensor,
    pub eps_e: Tensor,
}

impl ElboTerms {
    pub fn report(&self, tape: &Tape) -> LossReport {
        let v = |x: Var| tape.value(x).item();
        LossReport { total: v(self.l_gen), ..LossReport::default() }
            .with("recon", v(self.recon))
            .with("kl_v", v(self.kl_v))
            .with("kl_e", v(self.kl_e))
    }

    pub fn sample(&self, tape: &Tape) -> LatentSample {
        LatentSample {
            z_v: tape.value(self.z_v).clone(),
            z_e: tape.value(self.z_e).clone(),
            eps_v: self.eps_v.clone(),
            eps_e: self.eps_e.clone(),
        }
    }
}

/// Encodes, samples latents (noise drawn first from `rng`), decodes and
/// scores the reconstruction (negatives drawn next from `rng`).
pub fn elbo_on_tape(
    tape: &mut Tape,
    h: &Hypergraph,
    structure: &Structure,
    vars: &VhgaeVars,
    neg_k: usize,
    rng: &mut SeedRng,
) -> Result<ElboTerms> {
    let (x, w) = bind_inputs(tape, h);
    let post = vhgae_encode_on_tape(tape, structure, x, w, vars)?;
    let eps_v = standard_normal(tape.value(post.mu_v).shape(), rng);
    let eps_e = standard_normal(tape.value(post.mu_e).shape(), rng);
    let z_v = reparam_on_tape(tape, post.mu_v, post.log_sigma_v, eps_v.clone())?;
    let z_e = reparam_on_tape(tape, post.mu_e, post.log_sigma_e, eps_e.clone())?;
    let logits = decode_logits_on_tape(tape, z_v, z_e, structure)?;
    let recon = reconstruction_on_tape(tape, h, structure, z_v, z_e, neg_k, rng)?;
    let kl_v = kl_on_tape(tape, post.mu_v, post.log_sigma_v)?;
    let kl_e = kl_on_tape(tape, post.mu_e, post.log_sigma_e)?;
    let kl = tape.add(kl_v, kl_e)?;
    let l_gen = tape.add(recon, kl)?;
    Ok(ElboTerms { l_gen, recon, kl_v, kl_e, z_v, z_e, logits, eps_v, eps_e })
}

/// `L_gen = −ELBO` with its components, and the latent draw used.
pub fn elbo_loss(h: &Hypergraph, params: &VhgaeParams, seed: u64, neg_k: usize) -> Result<(LossReport, LatentSample)> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let terms = elbo_on_tape(&mut tape, h, &Structure::of(h), &vars, neg_k, &mut seed::plain(seed))?;
    Ok((terms.report(&tape), terms.sample(&tape)))
}

/// Logistic noise `log δ − log(1−δ)` with `δ ∼ Uniform(0, 1)` open.
pub fn logistic_noise(len: usize, rng: &mut SeedRng) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let d = loop {
                let d: f64 = rng.random();
                if d > 0.0 {
                    break d;
                }
            };
            math::ln(d) - math::ln(1.0 - d)
        })
        .collect()
}

fn check_temperature(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("Gumbel temperature must be positive, got {tau}")))
    }
}

fn squeeze(t: f64) -> f64 {
    GUMBEL_FLOOR + (1.0 - 2.0 * GUMBEL_FLOOR) * t
}

/// `T = sigmoid((w + noise)/τ)`, differentiable in `w`.
pub fn gumbel_on_tape(tape: &mut Tape, w: Var, tau: f64, noise: Vec<f64>) -> Result<Var> {
    check_temperature(tau)?;
    let noise = tape.constant(Tensor::vector(noise));
    let s = tape.add(w, noise)?;
    let s = tape.scale(s, 1.0 / tau)?;
    let t = tape.sigmoid(s)?;
    let t = tape.scale(t, 1.0 - 2.0 * GUMBEL_FLOOR)?;
    let floor = tape.constant(Tensor::scalar(GUMBEL_FLOOR));
    tape.add(t, floor)
}

/// Binary-concrete relaxation from explicit logistic noise.
pub fn gumbel_from_noise(w: &[f64], tau: f64, noise: &[f64]) -> Result<Vec<f64>> {
    check_temperature(tau)?;
    if w.len() != noise.len() {
        return Err(invalid("noise length does not match logits"));
    }
    Ok(w.iter().zip(noise).map(|(w, n)| squeeze(math::sigmoid((w + n) / tau))).collect())
}

pub fn gumbel_sample(w: &[f64], tau: f64, seed: u64) -> Result<Vec<f64>> {
    check_temperature(tau)?;
    let noise = logistic_noise(w.len(), &mut seed::plain(seed));
    gumbel_from_noise(w, tau, &noise)
}

/// Copy of `h` whose incidence weights are the soft mask `t`.
pub fn generate_view(h: &Hypergraph, t: &[f64]) -> Result<Hypergraph> {
    if t.len() != h.incidences().len() {
        return Err(invalid(format!("mask has {} entries for {} incidences", t.len(), h.incidences().len())));
    }
    h.clone().with_incidence_weights(t.to_vec())
}

/// `mean σ(w)`.
pub fn soft_keep_ratio(w: &[f64]) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    w.iter().map(|&x| math::sigmoid(x)).sum::<f64>() / w.len() as f64
}

/// `mean 1[T > ½]`.
pub fn hard_keep_ratio(t: &[f64]) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    t.iter().filter(|&&x| x > 0.5).count() as f64 / t.len() as f64
}
