//! Training objectives.
//!
//! The matching loss of group `X1` against group `X2` treats every sample of
//! `X1` as an anchor and every same-class sample of `X2` as a positive:
//!
//! ```text
//! L_M(X1, X2) = sum_{i in X1, P(i) != {}} -1/|P(i)| sum_{p in P(i)}
//!               log( exp(z_i . z_p / tau) / sum_{d in X2} exp(z_i . z_d / tau) )
//! ```
//!
//! Anchors without any positive in `X2` are skipped. The similarity
//! objective sums `L_M` over both orderings of (high-entropy half,
//! low-entropy half) of the stream batch and of (stream batch, memory
//! batch). Self-distillation is `KL(softmax(s / t) || softmax(sg(a) / t))`
//! averaged over the batch, with `s` the logits of the clean combined batch
//! and `a` the stop-gradient logits of its augmented copy.

use candle_core::{DType, Tensor, D};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar hyperparameters of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    /// Temperature of the matching loss.
    pub tau: f64,
    /// Distillation temperature.
    pub t: f64,
    /// Weight of the self-distillation term.
    pub lambda1: f64,
    /// Weight of the similarity term.
    pub lambda2: f64,
    /// How each matching loss combines its anchors.
    pub anchor_reduction: AnchorReduction,
}

/// Reduction over the anchors of one matching loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorReduction {
    /// Sum over anchors that have at least one positive.
    #[default]
    Sum,
    /// Mean over the same anchors.
    Mean,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            tau: 0.07,
            t: 4.0,
            lambda1: 1.0,
            lambda2: 0.5,
            anchor_reduction: AnchorReduction::Sum,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {}", self.t)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidArgument("loss weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Embeddings of one group of samples with their class labels.
#[derive(Debug, Clone)]
pub struct ContrastGroup {
    /// `N x d`, rows expected to be unit-norm.
    pub z: Tensor,
    pub labels: Vec<usize>,
}

impl ContrastGroup {
    pub fn new(z: Tensor, labels: Vec<usize>) -> Result<Self> {
        match z.dims() {
            [n, _] if *n == labels.len() && *n > 0 => Ok(Self { z, labels }),
            dims => Err(Error::Shape(format!(
                "contrast group needs a non-empty N x d matrix with N = {} labels, got {dims:?}",
                labels.len()
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sub-group of the given rows.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let idx: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
        let idx = Tensor::from_vec(idx, rows.len(), self.z.device())?;
        Self::new(
            self.z.index_select(&idx, 0)?,
            rows.iter().map(|&r| self.labels[r]).collect(),
        )
    }
}

/// Splits a batch into its high-entropy half (`plus`) and low-entropy half
/// (`minus`), returned as index lists in ascending batch order.
///
/// Samples are ranked by entropy with ties ordered by batch index (lower
/// index ranks lower). For odd sizes the extra sample goes to `minus`.
pub fn split_by_entropy(entropies: &[f64]) -> Result<(Vec<usize>, Vec<usize>)> {
    if entropies.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "entropy split needs at least 2 samples, got {}",
            entropies.len()
        )));
    }
    let mut order: Vec<usize> = (0..entropies.len()).collect();
    order.sort_by(|&a, &b| entropies[a].total_cmp(&entropies[b]).then(a.cmp(&b)));
    let cut = entropies.len() - entropies.len() / 2;
    let mut minus = order[..cut].to_vec();
    let mut plus = order[cut..].to_vec();
    minus.sort_unstable();
    plus.sort_unstable();
    Ok((plus, minus))
}

fn host_matrix(values: Vec<f64>, rows: usize, cols: usize, like: &Tensor) -> Result<Tensor> {
    Ok(Tensor::from_vec(values, (rows, cols), like.device())?.to_dtype(like.dtype())?)
}

/// Matching loss `L_M(g1, g2)`: anchors from `g1`, positives and the
/// normalizing denominator from `g2`. Returns a scalar tensor.
pub fn match_loss(g1: &ContrastGroup, g2: &ContrastGroup, tau: f64) -> Result<Tensor> {
    match_loss_reduced(g1, g2, tau, AnchorReduction::Sum)
}

/// [`match_loss`] with a choice of anchor reduction. A mean over zero
/// contributing anchors is 0.
pub fn match_loss_reduced(
    g1: &ContrastGroup,
    g2: &ContrastGroup,
    tau: f64,
    reduction: AnchorReduction,
) -> Result<Tensor> {
    if g1.is_empty() || g2.is_empty() {
        return Err(Error::InvalidArgument("matching loss needs two non-empty groups".into()));
    }
    if tau <= 0.0 {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let (n1, n2) = (g1.len(), g2.len());
    let sim = (g1.z.matmul(&g2.z.t()?.contiguous()?)? / tau)?;
    let max = sim.max_keepdim(1)?.detach();
    let lse = (sim.broadcast_sub(&max)?.exp()?.sum_keepdim(1)?.log()? + &max)?;
    let log_prob = sim.broadcast_sub(&lse)?;

    let mut mask = vec![0f64; n1 * n2];
    let mut inv_count = vec![0f64; n1];
    for (i, yi) in g1.labels.iter().enumerate() {
        let mut count = 0usize;
        for (p, yp) in g2.labels.iter().enumerate() {
            if yi == yp {
                mask[i * n2 + p] = 1.0;
                count += 1;
            }
        }
        if count > 0 {
            inv_count[i] = 1.0 / count as f64;
        }
    }
    let inv_count_nonzero = inv_count.iter().filter(|&&v| v > 0.0).count();
    let mask = host_matrix(mask, n1, n2, &sim)?;
    let inv_count = host_matrix(inv_count, n1, 1, &sim)?;
    let per_anchor = (log_prob * mask)?.sum_keepdim(1)?;
    let total = (per_anchor * inv_count)?.sum_all()?.neg()?;
    match reduction {
        AnchorReduction::Sum => Ok(total),
        AnchorReduction::Mean => {
            let anchors = inv_count_nonzero.max(1);
            Ok((total / anchors as f64)?)
        }
    }
}

/// The four-term similarity objective. `mem` may be `None` (or empty) early
/// in training, in which case the stream/memory terms vanish.
pub fn rm_loss(
    plus: &ContrastGroup,
    minus: &ContrastGroup,
    new: &ContrastGroup,
    mem: Option<&ContrastGroup>,
    tau: f64,
) -> Result<Tensor> {
    rm_loss_reduced(plus, minus, new, mem, tau, AnchorReduction::Sum)
}

/// [`rm_loss`] with every matching term reduced by `reduction`.
pub fn rm_loss_reduced(
    plus: &ContrastGroup,
    minus: &ContrastGroup,
    new: &ContrastGroup,
    mem: Option<&ContrastGroup>,
    tau: f64,
    reduction: AnchorReduction,
) -> Result<Tensor> {
    let m = |a, b| match_loss_reduced(a, b, tau, reduction);
    let within = (m(plus, minus)? + m(minus, plus)?)?;
    match mem {
        Some(mem) if !mem.is_empty() => {
            let across = (m(new, mem)? + m(mem, new)?)?;
            Ok((within + across)?)
        }
        _ => Ok(within),
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() || a.rank() != 2 {
        return Err(Error::Shape(format!(
            "{what}: expected two N x C matrices of equal shape, got {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Batch-mean `KL(softmax(student / t) || softmax(teacher / t))`. The
/// teacher is detached, so gradients reach the student only.
pub fn sdc_loss(student: &Tensor, teacher: &Tensor, t: f64) -> Result<Tensor> {
    same_shape(student, teacher, "self-distillation")?;
    let log_p = candle_nn::ops::log_softmax(&(student / t)?, D::Minus1)?;
    let log_q = candle_nn::ops::log_softmax(&(teacher.detach() / t)?, D::Minus1)?;
    let kl = (log_p.exp()? * (&log_p - log_q)?)?.sum(1)?;
    Ok(kl.mean(0)?)
}

/// Mean cross-entropy with natural log.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (n, c) = logits.dims2()?;
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for {c} classes")));
    }
    let target = Tensor::from_vec(
        labels.iter().map(|&y| y as u32).collect::<Vec<_>>(),
        n,
        logits.device(),
    )?;
    Ok(candle_nn::loss::cross_entropy(logits, &target)?)
}

/// `CE(logits, y) + CE(logits_aug, y)`.
pub fn ce_pair(logits: &Tensor, logits_aug: &Tensor, labels: &[usize]) -> Result<Tensor> {
    same_shape(logits, logits_aug, "cross-entropy pair")?;
    Ok((cross_entropy(logits, labels)? + cross_entropy(logits_aug, labels)?)?)
}

fn finite(value: f64, component: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            component: component.into(),
        })
    }
}

/// `ce + lambda1 * sdc + lambda2 * rm` on scalars.
pub fn total_loss(ce: f64, sdc: f64, rm: f64, w: &LossWeights) -> Result<f64> {
    let ce = finite(ce, "cross-entropy")?;
    let sdc = finite(sdc, "self-distillation")?;
    let rm = finite(rm, "similarity")?;
    Ok(ce + w.lambda1 * sdc + w.lambda2 * rm)
}

/// Scalar value of a loss tensor, failing on NaN or infinity.
pub fn scalar(loss: &Tensor, component: &str) -> Result<f64> {
    let v = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
    finite(v, component)
}
