//! Categorical distribution algebra: construction with a strict-positivity
//! floor, Shannon entropy, divergences and the decision metrics used by the
//! fusion and evaluation layers.

use crate::error::{Error, Result};

/// A normalized, strictly positive probability vector over a finite
/// intention set.
///
/// Every entry is `> 0` and the entries sum to 1 within `1e-9`. Strict
/// positivity is enforced at construction (a floor is applied and the vector
/// renormalized), so product-style fusion downstream can never be vetoed by
/// a zero entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

/// Default probability floor applied at construction.
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Tolerance on the sum-to-one invariant.
pub const NORMALIZATION_TOL: f64 = 1e-9;

impl Categorical {
    /// Builds a distribution proportional to `weights` (after the default
    /// floor is applied).
    ///
    /// Rejects vectors that are shorter than 2, contain a negative entry or
    /// are entirely zero.
    pub fn normalize(weights: &[f64]) -> Result<Self> {
        Self::normalize_with_floor(weights, DEFAULT_FLOOR)
    }

    /// Like [`Categorical::normalize`] with an explicit floor.
    pub fn normalize_with_floor(weights: &[f64], floor: f64) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 entries, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "negative or non-finite entry {w}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("all entries are zero".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        Self::floor_and_renormalize(&probs, floor)
    }

    /// Applies `max(p, floor)` entrywise and renormalizes.
    ///
    /// Every output entry ends up `>= floor / (1 + N*floor)`, strictly
    /// positive; entries already above the floor are perturbed only by the
    /// renormalization. `floor` must lie in `(0, 1/N)`.
    pub fn floor_and_renormalize(probs: &[f64], floor: f64) -> Result<Self> {
        let n = probs.len();
        if n < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 entries, got {n}"
            )));
        }
        if !(floor > 0.0 && floor < 1.0 / n as f64) {
            return Err(Error::InvalidConfig(format!(
                "floor {floor} outside (0, 1/{n})"
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "negative or non-finite entry {p}"
            )));
        }
        let floored: Vec<f64> = probs.iter().map(|p| p.max(floor)).collect();
        let sum: f64 = floored.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("all entries are zero".into()));
        }
        Ok(Self {
            probs: floored.into_iter().map(|p| p / sum).collect(),
        })
    }

    /// Validates `probs` as an already-normalized strictly positive vector
    /// and stores it bit-for-bit (no floor, no renormalization).
    ///
    /// This is the deserialization path: values written by this crate round
    /// trip exactly.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 entries, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p <= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is not strictly positive"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            probs: probs.to_vec(),
        })
    }

    /// Normalizes a strictly positive raw vector without flooring.
    ///
    /// Fusion output path: the entries are exponentials, so they are already
    /// positive unless an extreme weight underflowed one to zero, in which
    /// case the floor is applied as a fallback.
    pub(crate) fn from_raw_positive(raw: &[f64]) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0) || raw.len() < 2 {
            return Err(Error::InvalidDistribution(
                "raw vector must be nonempty with positive mass".into(),
            ));
        }
        let probs: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        if probs.iter().all(|p| *p > 0.0) {
            Ok(Self { probs })
        } else {
            Self::floor_and_renormalize(&probs, DEFAULT_FLOOR)
        }
    }

    /// Floored one-hot distribution: all mass on `index`, then the default
    /// floor applied. The standard encoding for deterministic advice.
    pub fn one_hot(len: usize, index: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        let mut w = vec![0.0; len];
        w[index] = 1.0;
        Self::normalize(&w)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 2 by construction
    }

    /// Shannon entropy in nats: `H = -sum p ln p`, in `[0, ln N]`.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().map(|p| p * p.ln()).sum::<f64>()
    }

    /// `D_KL(self || other) = sum p ln(p/q)`, nonnegative, zero iff equal.
    pub fn kl_divergence(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| p * (p / q).ln())
            .sum())
    }

    /// Cross entropy `H(p, q) = -sum p ln q = H(p) + D_KL(p || q)`.
    pub fn cross_entropy(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        Ok(-self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(p, q)| p * q.ln())
            .sum::<f64>())
    }

    /// Probability of the true intention minus the largest probability among
    /// the others; in `[-1, 1]`, positive iff the true index is the unique
    /// argmax.
    pub fn score_difference(&self, true_index: usize) -> Result<f64> {
        if true_index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: true_index,
                len: self.len(),
            });
        }
        let best_other = self
            .probs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != true_index)
            .map(|(_, p)| *p)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(self.probs[true_index] - best_other)
    }

    /// Smallest index attaining the maximum probability.
    pub fn argmax_tiebreak(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}
