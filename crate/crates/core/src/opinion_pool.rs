//! Weighted Opinion Pool fusion and the confidence constraint families
//! (IOP, LogOP, EIOP) with Euclidean projection onto the feasible set.
//!
//! Fusion raises every base distribution to its confidence exponent,
//! multiplies and renormalizes. Computed in log space with a max shift so
//! products of many small probabilities cannot underflow.

use crate::distributions::Categorical;
use crate::error::{Error, Result};

/// Per-modality confidence exponents; nonnegative, length `K >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector {
    weights: Vec<f64>,
}

impl ConfidenceVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidConfig("confidence vector is empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence entries must be finite and nonnegative, got {w}"
            )));
        }
        Ok(Self { weights })
    }

    /// The all-ones vector: plain product fusion.
    pub fn ones(k: usize) -> Self {
        Self {
            weights: vec![1.0; k.max(1)],
        }
    }

    /// Uniform weights summing to one.
    pub fn uniform(k: usize) -> Self {
        let k = k.max(1);
        Self {
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }
}

/// The three constraint families for the confidence space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    /// All weights fixed at one.
    Iop,
    /// Nonnegative weights summing to one (normalized geometric mean).
    LogOp,
    /// Nonnegative weights summing to K; contains IOP as the all-ones point.
    Eiop,
}

impl PoolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoolKind::Iop => "IOP",
            PoolKind::LogOp => "LogOP",
            PoolKind::Eiop => "EIOP",
        }
    }
}

impl std::str::FromStr for PoolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iop" => Ok(PoolKind::Iop),
            "logop" => Ok(PoolKind::LogOp),
            "eiop" => Ok(PoolKind::Eiop),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

/// The feasible confidence set: an equality (sum) constraint plus per-entry
/// lower bounds.
///
/// The projection enforces `{sum = target, entries >= 0}` only; the lower
/// bound rows `g_i(w) = lower_bound - w_i <= 0` are the dual player's job
/// during learning. Setting `lb_via_projection` moves the lower bound into
/// the projection instead, which makes the inequality rows vacuous.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    kind: PoolKind,
    k: usize,
    sum_target: f64,
    lower_bound: f64,
    lb_via_projection: bool,
}

impl ConstraintSpec {
    /// Default per-entry lower bound on learned confidence.
    pub const DEFAULT_LOWER_BOUND: f64 = 0.1;

    pub fn new(kind: PoolKind, k: usize, lower_bound: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("modality count must be >= 1".into()));
        }
        if !lower_bound.is_finite() || lower_bound < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lower bound must be finite and nonnegative, got {lower_bound}"
            )));
        }
        let sum_target = match kind {
            PoolKind::Iop => k as f64, // the all-ones point
            PoolKind::LogOp => 1.0,
            PoolKind::Eiop => k as f64,
        };
        if k as f64 * lower_bound > sum_target + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "infeasible: {k} * lower bound {lower_bound} exceeds sum target {sum_target}"
            )));
        }
        Ok(Self {
            kind,
            k,
            sum_target,
            lower_bound,
            lb_via_projection: false,
        })
    }

    /// Enforce the lower bound inside the projection instead of leaving it
    /// to the dual player.
    pub fn with_lb_via_projection(mut self, enabled: bool) -> Self {
        self.lb_via_projection = enabled;
        self
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sum_target(&self) -> f64 {
        self.sum_target
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn lb_via_projection(&self) -> bool {
        self.lb_via_projection
    }

    /// Number of inequality rows (one lower bound per modality).
    pub fn num_inequalities(&self) -> usize {
        self.k
    }

    /// True when the feasible set contains a single point (IOP always;
    /// LogOP/EIOP when K = 1).
    pub fn is_singleton(&self) -> bool {
        matches!(self.kind, PoolKind::Iop) || self.k == 1
    }
}

/// Fused distribution proportional to `prod_i P(a|m_i)^{w_i}`.
///
/// Log-score per intention is `sum_i w_i ln p_i(a)`, shifted by its maximum
/// and exponentiated-normalized.
pub fn fuse(bases: &[Categorical], weights: &ConfidenceVector) -> Result<Categorical> {
    if bases.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: bases.len(),
        });
    }
    let n = bases[0].len();
    for b in bases {
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
    }
    let mut log_scores = vec![0.0; n];
    for (base, w) in bases.iter().zip(weights.as_slice()) {
        for (s, p) in log_scores.iter_mut().zip(base.probs()) {
            *s += w * p.ln();
        }
    }
    let max = log_scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let raw: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
    Categorical::from_raw_positive(&raw)
}

/// The fixed IOP confidence: all ones.
pub fn iop_weights(k: usize) -> ConfidenceVector {
    ConfidenceVector::ones(k)
}

/// Euclidean projection onto the feasible confidence set.
///
/// For IOP this is the all-ones vector unconditionally. Otherwise the
/// sort-and-threshold simplex projection onto `{sum = target, v >= lb_eff}`
/// where `lb_eff` is 0 unless the spec moves the lower bound into the
/// projection. Idempotent: already-feasible inputs are returned unchanged.
pub fn project(weights: &[f64], spec: &ConstraintSpec) -> Result<ConfidenceVector> {
    if weights.len() != spec.k() {
        return Err(Error::DimensionMismatch {
            expected: spec.k(),
            got: weights.len(),
        });
    }
    let mut v = weights.to_vec();
    let mut scratch = Vec::new();
    project_raw(&mut v, spec, &mut scratch);
    ConfidenceVector::new(v)
}

/// In-place projection with a caller-provided sort scratch buffer; the
/// optimizer's inner loop calls this every iteration.
pub(crate) fn project_raw(weights: &mut [f64], spec: &ConstraintSpec, scratch: &mut Vec<f64>) {
    if let PoolKind::Iop = spec.kind() {
        weights.fill(1.0);
        return;
    }
    let lb = if spec.lb_via_projection() {
        spec.lower_bound()
    } else {
        0.0
    };
    let target = spec.sum_target();
    let tol = 1e-10 * (1.0 + target.abs());
    let sum: f64 = weights.iter().sum();
    if (sum - target).abs() <= tol && weights.iter().all(|w| *w >= lb) {
        return;
    }

    // Project (w - lb) onto the simplex of mass (target - K*lb), shift back.
    let shifted_target = target - weights.len() as f64 * lb;
    if shifted_target <= 0.0 {
        weights.fill(lb);
        return;
    }
    scratch.clear();
    scratch.extend(weights.iter().map(|w| w - lb));
    scratch.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, u) in scratch.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - shifted_target) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for w in weights.iter_mut() {
        *w = (*w - lb - theta).max(0.0) + lb;
    }
}

/// The inequality rows `g_i(w) = lower_bound - w_i`; nonpositive iff the
/// lower bounds hold.
pub fn constraint_values(weights: &ConfidenceVector, spec: &ConstraintSpec) -> Vec<f64> {
    weights
        .as_slice()
        .iter()
        .map(|w| spec.lower_bound() - w)
        .collect()
}

/// Raises sub-lower-bound entries to the bound and removes the added mass
/// from the remaining entries in proportion to their excess, preserving the
/// sum. Applied once to a learned confidence so the returned vector is
/// feasible even if the dual player under-enforced a bound at stopping time.
pub fn redistribute_to_lower_bound(
    weights: &ConfidenceVector,
    spec: &ConstraintSpec,
) -> ConfidenceVector {
    let lb = spec.lower_bound();
    let w = weights.as_slice();
    let deficit: f64 = w.iter().map(|v| (lb - v).max(0.0)).sum();
    if deficit == 0.0 {
        return weights.clone();
    }
    let total_excess: f64 = w.iter().map(|v| (v - lb).max(0.0)).sum();
    if total_excess <= 0.0 {
        // Only possible when sum_target == K * lb.
        return ConfidenceVector::new(vec![lb; w.len()]).expect("lb is nonnegative");
    }
    let scale = 1.0 - deficit / total_excess;
    let adjusted: Vec<f64> = w
        .iter()
        .map(|v| if *v < lb { lb } else { lb + (v - lb) * scale })
        .collect();
    ConfidenceVector::new(adjusted).expect("clamped entries are nonnegative")
}
