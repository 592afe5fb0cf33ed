use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;

use crate::diffnum::Tensor;
use crate::error::{invalid, Error, Result};
use crate::hypergraph::Hypergraph;
use crate::math;
use crate::model::{classify, encode, ModelParams};
use crate::seed;

/// Row-wise argmax; ties go to the lowest index.
pub fn predictions(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Percentage of masked vertices whose argmax logit equals the label.
pub fn accuracy(logits: &Tensor, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if logits.rows() != labels.len() || mask.len() != labels.len() {
        return Err(invalid("logits, labels and mask disagree on vertex count"));
    }
    let preds = predictions(logits);
    let (mut hit, mut total) = (0usize, 0usize);
    for i in (0..labels.len()).filter(|&i| mask[i]) {
        total += 1;
        hit += (preds[i] == labels[i]) as usize;
    }
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(100.0 * hit as f64 / total as f64)
}

/// Test-mode (no dropout) accuracy of `params` on `h` over `mask`.
pub fn evaluate(params: &ModelParams, h: &Hypergraph, mask: &[bool]) -> Result<f64> {
    let labels = h.labels().ok_or_else(|| invalid("evaluation requires labels"))?;
    let (z, _) = encode(h, &params.encoder, None)?;
    accuracy(&classify(&z, &params.classifier)?, labels, mask)
}

/// `(Δ_SP, Δ_EO)` in percent.
pub fn fairness_metrics(predictions: &[bool], labels: &[bool], sensitive: &[u8]) -> Result<(f64, f64)> {
    if predictions.len() != labels.len() || labels.len() != sensitive.len() {
        return Err(invalid("predictions, labels and sensitive attributes differ in length"));
    }
    let rate = |pick: &dyn Fn(usize) -> bool, what: &'static str| -> Result<f64> {
        let idx: Vec<usize> = (0..predictions.len()).filter(|&i| pick(i)).collect();
        if idx.is_empty() {
            return Err(Error::EmptyGroup(what));
        }
        Ok(idx.iter().filter(|&&i| predictions[i]).count() as f64 / idx.len() as f64)
    };
    let sp0 = rate(&|i| sensitive[i] == 0, "sensitive group s=0 is empty")?;
    let sp1 = rate(&|i| sensitive[i] == 1, "sensitive group s=1 is empty")?;
    let eo0 = rate(&|i| sensitive[i] == 0 && labels[i], "no positives with s=0")?;
    let eo1 = rate(&|i| sensitive[i] == 1 && labels[i], "no positives with s=1")?;
    Ok((math::fabs(sp0 - sp1) * 100.0, math::fabs(eo0 - eo1) * 100.0))
}

/// Area under the ROC curve, ties counted as one half. `None` when either
/// class is absent.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut sorted_neg = neg.clone();
    sorted_neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for p in &pos {
        let below = sorted_neg.partition_point(|n| n < p);
        let not_above = sorted_neg.partition_point(|n| n <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// F1 score of the positive class; 0 when it is undefined.
pub fn f1_binary(predictions: &[bool], labels: &[bool]) -> f64 {
    let tp = predictions.iter().zip(labels).filter(|(&p, &l)| p && l).count() as f64;
    let fp = predictions.iter().zip(labels).filter(|(&p, &l)| p && !l).count() as f64;
    let fne = predictions.iter().zip(labels).filter(|(&p, &l)| !p && l).count() as f64;
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fne)
    }
}

/// Removes exactly `round(ratio·|incidences|)` uniformly chosen incidences
/// and drops emptied hyperedges.
pub fn random_perturb_attack(h: &Hypergraph, ratio: f64, seed: u64) -> Result<Hypergraph> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(invalid(format!("attack ratio must lie in [0, 1], got {ratio}")));
    }
    let total = h.incidences().len();
    let count = (math::round(ratio * total as f64) as usize).min(total);
    let mut removed = alloc::vec![false; total];
    let mut rng = seed::rng(seed, seed::tag::ATTACK, 0);
    for k in index::sample(&mut rng, total, count) {
        removed[k] = true;
    }
    let mut incs = Vec::with_capacity(total - count);
    let mut weights = h.incidence_weights().map(|_| Vec::with_capacity(total - count));
    for (k, inc) in h.incidences().iter().enumerate() {
        if !removed[k] {
            incs.push(*inc);
            if let (Some(w), Some(src)) = (weights.as_mut(), h.incidence_weights()) {
                w.push(src[k]);
            }
        }
    }
    h.rebuild(incs, weights, h.features().clone())
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, math::sqrt(var)))
}
