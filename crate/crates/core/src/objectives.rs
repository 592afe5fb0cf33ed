//! Supervised, contrastive and composite losses.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;

use serde::{Deserialize, Serialize};

use crate::diffnum::{Tape, Tensor, Var};
use crate::error::{invalid, Error, Result};

/// Additive offset placed on the similarity diagonal so self-pairs drop out
/// of the contrastive softmax.
const SELF_MASK: f64 = -1e9;

/// Scalar loss with its named parts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub components: BTreeMap<String, f64>,
}

impl LossReport {
    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.components.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.components.get(name).copied()
    }
}

/// Mean of `−log softmax(logits)[label]` over the masked rows.
pub fn cross_entropy_on_tape(tape: &mut Tape, logits: Var, labels: &[usize], mask: &[bool]) -> Result<Var> {
    let shape = tape.value(logits).shape().to_vec();
    if shape.len() != 2 || shape[0] != labels.len() || mask.len() != labels.len() {
        return Err(Error::Shape { op: "cross_entropy", shapes: vec![shape, vec![labels.len()], vec![mask.len()]] });
    }
    let classes = shape[1];
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let mut pick = vec![0.0; labels.len() * classes];
    for (i, (&y, &m)) in labels.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        if y >= classes {
            return Err(invalid(format!("label {y} out of range for {classes} classes")));
        }
        pick[i * classes + y] = 1.0;
    }
    let pick = tape.constant(Tensor::matrix(labels.len(), classes, pick)?);
    let probs = tape.softmax_rows(logits)?;
    let logp = tape.log(probs)?;
    let picked = tape.mul(logp, pick)?;
    let total = tape.sum(picked)?;
    tape.scale(total, -1.0 / count as f64)
}

pub fn cross_entropy(logits: &Tensor, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let mut tape = Tape::new();
    let l = tape.constant(logits.clone());
    let loss = cross_entropy_on_tape(&mut tape, l, labels, mask)?;
    Ok(tape.value(loss).item())
}

/// NT-Xent over two aligned views.
///
/// Each of the `2n` projections is an anchor; its positive is the same row
/// in the other view and the remaining `2n − 2` projections are negatives.
/// Similarities are dot products of the (already normalized) rows.
pub fn nt_xent_on_tape(tape: &mut Tape, p1: Var, p2: Var, temperature: f64) -> Result<Var> {
    if !(temperature > 0.0) {
        return Err(invalid(format!("contrastive temperature must be positive, got {temperature}")));
    }
    let (s1, s2) = (tape.value(p1).shape().to_vec(), tape.value(p2).shape().to_vec());
    if s1.len() != 2 || s1 != s2 {
        return Err(Error::Shape { op: "nt_xent", shapes: vec![s1, s2] });
    }
    let n = s1[0];
    if n < 2 {
        return Err(invalid(format!("contrastive loss needs at least 2 vertices, got {n}")));
    }
    let m = 2 * n;
    let z = tape.concat_rows(p1, p2)?;
    let zt = tape.transpose(z)?;
    let sim = tape.matmul(z, zt)?;
    let sim = tape.scale(sim, 1.0 / temperature)?;
    let mut diag = vec![0.0; m * m];
    for i in 0..m {
        diag[i * m + i] = SELF_MASK;
    }
    let diag = tape.constant(Tensor::matrix(m, m, diag)?);
    let logits = tape.add(sim, diag)?;
    let probs = tape.softmax_rows(logits)?;
    let flat = tape.reshape(probs, &[m * m, 1])?;
    let positives: Arc<[usize]> = (0..m).map(|i| i * m + (i + n) % m).collect();
    let picked = tape.gather_rows(flat, positives)?;
    let logp = tape.log(picked)?;
    let total = tape.sum(logp)?;
    tape.scale(total, -1.0 / m as f64)
}

pub fn nt_xent(p1: &Tensor, p2: &Tensor, temperature: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(p1.clone());
    let b = tape.constant(p2.clone());
    let loss = nt_xent_on_tape(&mut tape, a, b, temperature)?;
    Ok(tape.value(loss).item())
}

/// `ce + λ·ntxent`.
pub fn mtl_loss_on_tape(tape: &mut Tape, ce: Var, ntxent: Var, lambda: f64) -> Result<Var> {
    let weighted = tape.scale(ntxent, lambda)?;
    tape.add(ce, weighted)
}

pub fn mtl_loss(ce: f64, ntxent: f64, lambda: f64) -> LossReport {
    LossReport { total: ce + lambda * ntxent, components: BTreeMap::new() }.with("ce", ce).with("ntxent", ntxent)
}

/// `L_gen − β·L_cl`, minimized by the generator alone.
pub fn generator_objective_on_tape(tape: &mut Tape, l_gen: Var, l_cl: Var, beta: f64) -> Result<Var> {
    let weighted = tape.scale(l_cl, beta)?;
    tape.sub(l_gen, weighted)
}

pub fn generator_objective(l_gen: f64, l_cl: f64, beta: f64) -> f64 {
    l_gen - beta * l_cl
}

/// Per-row normalization helper kept separate for reuse by callers that
/// want projection-free contrast.
pub fn normalize_rows(t: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let v = tape.constant(t.clone());
    let n = tape.l2_normalize_rows(v)?;
    Ok(tape.value(n).clone())
}
