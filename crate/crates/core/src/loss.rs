//! Batch cross-entropy loss of the fused distribution against advice, its
//! closed-form gradient, and the Lagrangian used by the primal-dual learner.
//!
//! For one experience the loss is `H(advice, fuse(bases, w))`, which expands
//! to `ln Z(w) - sum_i w_i E_advice[ln p_i]` with `Z` the fusion
//! normalization constant. Differentiating gives the gradient used here:
//!
//! `dL/dw_i = E_fused[ln p_i] - E_advice[ln p_i]`
//!
//! Batch reductions use compensated (Neumaier) summation so results do not
//! depend on reduction order beyond 1e-12.

use crate::distributions::Categorical;
use crate::error::{Error, Result};
use crate::learner::DualVector;
use crate::opinion_pool::{constraint_values, fuse, ConfidenceVector, ConstraintSpec};

/// One recorded interaction: K base distributions plus the advice
/// distribution (deterministic advice is a floored one-hot).
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    bases: Vec<Categorical>,
    advice: Categorical,
    meta: Meta,
}

/// Free-form tags attached to an experience.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Meta {
    pub true_index: Option<usize>,
    pub scenario: Option<String>,
}

impl Experience {
    pub fn new(bases: Vec<Categorical>, advice: Categorical, meta: Meta) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::InvalidBatch("experience with no bases".into()));
        }
        for b in &bases {
            if b.len() != advice.len() {
                return Err(Error::DimensionMismatch {
                    expected: advice.len(),
                    got: b.len(),
                });
            }
        }
        Ok(Self {
            bases,
            advice,
            meta,
        })
    }

    pub fn bases(&self) -> &[Categorical] {
        &self.bases
    }

    pub fn advice(&self) -> &Categorical {
        &self.advice
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    /// Number of modalities.
    pub fn k(&self) -> usize {
        self.bases.len()
    }

    /// Number of intentions.
    pub fn n(&self) -> usize {
        self.advice.len()
    }

    /// The ground-truth intention: the explicit tag when present, otherwise
    /// the advice argmax.
    pub fn true_index(&self) -> usize {
        self.meta
            .true_index
            .unwrap_or_else(|| self.advice.argmax_tiebreak())
    }

    /// Copy of this experience restricted to a subset of modalities.
    pub fn select_modalities(&self, subset: &[usize]) -> Result<Self> {
        let mut bases = Vec::with_capacity(subset.len());
        for &i in subset {
            let base = self.bases.get(i).ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.bases.len(),
            })?;
            bases.push(base.clone());
        }
        Experience::new(bases, self.advice.clone(), self.meta.clone())
    }
}

/// A nonempty, homogeneous (same K and N) collection of experiences.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    experiences: Vec<Experience>,
}

impl Batch {
    pub fn new(experiences: Vec<Experience>) -> Result<Self> {
        let first = experiences
            .first()
            .ok_or_else(|| Error::InvalidBatch("empty batch".into()))?;
        let (k, n) = (first.k(), first.n());
        for e in &experiences {
            if e.k() != k {
                return Err(Error::InvalidBatch(format!(
                    "mixed modality counts {} and {}",
                    k,
                    e.k()
                )));
            }
            if e.n() != n {
                return Err(Error::InvalidBatch(format!(
                    "mixed intention counts {} and {}",
                    n,
                    e.n()
                )));
            }
        }
        Ok(Self { experiences })
    }

    pub fn experiences(&self) -> &[Experience] {
        &self.experiences
    }

    pub fn len(&self) -> usize {
        self.experiences.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn k(&self) -> usize {
        self.experiences[0].k()
    }

    pub fn n(&self) -> usize {
        self.experiences[0].n()
    }

    pub fn select_modalities(&self, subset: &[usize]) -> Result<Self> {
        let experiences = self
            .experiences
            .iter()
            .map(|e| e.select_modalities(subset))
            .collect::<Result<Vec<_>>>()?;
        Batch::new(experiences)
    }

    /// Splits into (first `count`, remainder) preserving order.
    pub fn split_at(&self, count: usize) -> Result<(Batch, Batch)> {
        if count == 0 || count >= self.len() {
            return Err(Error::InsufficientData {
                required: count + 1,
                got: self.len(),
            });
        }
        let (a, b) = self.experiences.split_at(count);
        Ok((Batch::new(a.to_vec())?, Batch::new(b.to_vec())?))
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    correction: f64,
}

impl Compensated {
    fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.correction += (self.sum - t) + value;
        } else {
            self.correction += (value - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.correction
    }
}

/// Precomputed log tables for a batch: the optimizer's hot path evaluates
/// the loss and its gradient thousands of times on a fixed batch, so the
/// base log-probabilities and advice expectations are taken once.
///
/// For one experience with fused log-score `s_a = sum_i w_i ln p_i(a)`,
/// shifted by `m = max_a s_a`:
///
/// `loss = m + ln Z - sum_i w_i * E_advice[ln p_i]`, `Z = sum_a e^{s_a - m}`
/// `grad_i = E_fused[ln p_i] - E_advice[ln p_i]`
#[derive(Debug, Clone)]
pub(crate) struct LossTables {
    k: usize,
    n: usize,
    count: usize,
    /// `count * k * n` base log-probabilities, experience-major.
    base_logs: Vec<f64>,
    /// `count * k` advice expectations of the base log-probabilities.
    advice_dot: Vec<f64>,
    scores: Vec<f64>,
    fused: Vec<f64>,
}

impl LossTables {
    pub(crate) fn new(batch: &Batch) -> Self {
        let (k, n, count) = (batch.k(), batch.n(), batch.len());
        let mut base_logs = Vec::with_capacity(count * k * n);
        let mut advice_dot = Vec::with_capacity(count * k);
        for x in batch.experiences() {
            for base in x.bases() {
                let mut dot = 0.0;
                for (p, a) in base.probs().iter().zip(x.advice().probs()) {
                    let lp = p.ln();
                    base_logs.push(lp);
                    dot += a * lp;
                }
                advice_dot.push(dot);
            }
        }
        Self {
            k,
            n,
            count,
            base_logs,
            advice_dot,
            scores: vec![0.0; n],
            fused: vec![0.0; n],
        }
    }

    pub(crate) fn k(&self) -> usize {
        self.k
    }

    /// Fills the fused-distribution scratch for one experience and returns
    /// `(max log-score, normalization mass)`.
    fn fill_fused(&mut self, exp_idx: usize, weights: &[f64]) -> (f64, f64) {
        let (k, n) = (self.k, self.n);
        let logs = &self.base_logs[exp_idx * k * n..(exp_idx + 1) * k * n];
        self.scores[..n].fill(0.0);
        for (i, w) in weights.iter().enumerate() {
            for (s, lp) in self.scores[..n].iter_mut().zip(&logs[i * n..(i + 1) * n]) {
                *s += w * lp;
            }
        }
        let max = self.scores[..n]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut z = 0.0;
        for (f, s) in self.fused[..n].iter_mut().zip(&self.scores[..n]) {
            *f = (s - max).exp();
            z += *f;
        }
        (max, z)
    }

    pub(crate) fn loss(&mut self, weights: &[f64]) -> f64 {
        let mut acc = Compensated::default();
        for e in 0..self.count {
            let (max, z) = self.fill_fused(e, weights);
            let dot = &self.advice_dot[e * self.k..(e + 1) * self.k];
            let linear: f64 = weights.iter().zip(dot).map(|(w, d)| w * d).sum();
            acc.add(max + z.ln() - linear);
        }
        acc.total() / self.count as f64
    }

    pub(crate) fn loss_gradient_into(&mut self, weights: &[f64], grad: &mut [f64]) {
        let (k, n) = (self.k, self.n);
        let mut acc = vec![Compensated::default(); k];
        for e in 0..self.count {
            let (_, z) = self.fill_fused(e, weights);
            let logs = &self.base_logs[e * k * n..(e + 1) * k * n];
            let dot = &self.advice_dot[e * k..(e + 1) * k];
            for i in 0..k {
                let mut fused_expectation = 0.0;
                for (f, lp) in self.fused[..n].iter().zip(&logs[i * n..(i + 1) * n]) {
                    fused_expectation += f * lp;
                }
                acc[i].add(fused_expectation / z - dot[i]);
            }
        }
        for (g, a) in grad.iter_mut().zip(acc) {
            *g = a.total() / self.count as f64;
        }
    }
}

/// Cross entropy of the advice against the fused distribution.
pub fn sample_loss(x: &Experience, weights: &ConfidenceVector) -> Result<f64> {
    let fused = fuse(x.bases(), weights)?;
    x.advice().cross_entropy(&fused)
}

/// Mean sample loss over the batch.
pub fn batch_loss(batch: &Batch, weights: &ConfidenceVector) -> Result<f64> {
    let mut acc = Compensated::default();
    for x in batch.experiences() {
        acc.add(sample_loss(x, weights)?);
    }
    Ok(acc.total() / batch.len() as f64)
}

/// Closed-form gradient of [`batch_loss`] in the confidence weights:
/// per modality, the mean of `E_fused[ln p_i] - E_advice[ln p_i]`.
pub fn loss_gradient(batch: &Batch, weights: &ConfidenceVector) -> Result<Vec<f64>> {
    if batch.k() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.k(),
            got: weights.len(),
        });
    }
    let k = batch.k();
    let mut acc = vec![Compensated::default(); k];
    for x in batch.experiences() {
        let fused = fuse(x.bases(), weights)?;
        for (i, base) in x.bases().iter().enumerate() {
            let mut expectation_gap = 0.0;
            for ((p_fused, p_advice), p_base) in fused
                .probs()
                .iter()
                .zip(x.advice().probs())
                .zip(base.probs())
            {
                expectation_gap += (p_fused - p_advice) * p_base.ln();
            }
            acc[i].add(expectation_gap);
        }
    }
    Ok(acc
        .into_iter()
        .map(|a| a.total() / batch.len() as f64)
        .collect())
}

/// `L(w, lambda) = batch_loss(w) + lambda' G(w)` with the augmented dual:
/// `lambda` has one entry per inequality row plus a final entry multiplying
/// a constant zero row.
pub fn lagrangian(
    batch: &Batch,
    weights: &ConfidenceVector,
    lam: &DualVector,
    spec: &ConstraintSpec,
) -> Result<f64> {
    check_dual_len(lam, spec)?;
    let g = constraint_values(weights, spec);
    let penalty: f64 = lam.lambdas()[..spec.num_inequalities()]
        .iter()
        .zip(&g)
        .map(|(l, gi)| l * gi)
        .sum();
    Ok(batch_loss(batch, weights)? + penalty)
}

/// Gradient of the Lagrangian in `w`: the loss gradient minus the first K
/// dual entries (the Jacobian of `g_i(w) = lb - w_i` is minus identity).
pub fn lagrangian_gradient(
    batch: &Batch,
    weights: &ConfidenceVector,
    lam: &DualVector,
    spec: &ConstraintSpec,
) -> Result<Vec<f64>> {
    check_dual_len(lam, spec)?;
    let mut grad = loss_gradient(batch, weights)?;
    for (g, l) in grad.iter_mut().zip(lam.lambdas()) {
        *g -= l;
    }
    Ok(grad)
}

fn check_dual_len(lam: &DualVector, spec: &ConstraintSpec) -> Result<()> {
    if lam.lambdas().len() != spec.num_inequalities() + 1 {
        return Err(Error::DimensionMismatch {
            expected: spec.num_inequalities() + 1,
            got: lam.lambdas().len(),
        });
    }
    Ok(())
}
