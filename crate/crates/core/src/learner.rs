//! Batch confidence learning: a primal-dual game between a projected
//! gradient descent confidence player and an Exponentiated Gradient dual
//! player, with averaged iterates and a primal-dual gap stopping rule.
//!
//! Each round the confidence player best-responds to the current dual
//! variable by projected gradient descent on the Lagrangian, restarted from
//! the configured initial confidence. The dual player then takes a
//! multiplicative step on the augmented constraint values. Running averages
//! of both players' iterates give the gap estimate
//!
//! `L_max = loss(w_avg) + B * max(0, max_i g_i(w_avg))`
//! `L_min = loss(w_br)  + lam_avg' g(w_br)`
//!
//! where `w_br` best-responds to the averaged dual. Learning stops when
//! `L_max - L_min` drops below the configured threshold.

use crate::error::{Error, Result};
use crate::loss::{lagrangian_gradient, Batch, LossTables};
use crate::opinion_pool::{
    constraint_values, project, project_raw, redistribute_to_lower_bound, ConfidenceVector,
    ConstraintSpec, PoolKind,
};
use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The augmented dual variable: one multiplier per inequality row plus a
/// slack entry multiplying a constant zero row, kept on the simplex of l1
/// mass `B` by the EG update.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    lambdas: Vec<f64>,
    b_bound: f64,
}

impl DualVector {
    pub fn new(lambdas: Vec<f64>, b_bound: f64) -> Result<Self> {
        if lambdas.is_empty() || b_bound <= 0.0 {
            return Err(Error::InvalidConfig(
                "dual vector needs entries and a positive l1 bound".into(),
            ));
        }
        if let Some(l) = lambdas.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dual entries must be finite and nonnegative, got {l}"
            )));
        }
        Ok(Self { lambdas, b_bound })
    }

    /// Even split `B/(s+1)` over the `s` inequality rows and the slack row.
    pub fn uniform_init(num_inequalities: usize, b_bound: f64) -> Self {
        let dim = num_inequalities + 1;
        Self {
            lambdas: vec![b_bound / dim as f64; dim],
            b_bound,
        }
    }

    /// All-zero dual of matching shape (used to evaluate the plain loss
    /// through the Lagrangian interface; not a simplex point).
    pub fn zeros(num_inequalities: usize, b_bound: f64) -> Self {
        Self {
            lambdas: vec![0.0; num_inequalities + 1],
            b_bound,
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn b_bound(&self) -> f64 {
        self.b_bound
    }
}

/// Hyperparameters for [`learn`].
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    /// Primal-dual gap threshold for stopping.
    pub eps_gap: f64,
    /// Minimum number of records the batch must contain.
    pub batch_required: usize,
    /// Exponentiated Gradient learning rate.
    pub eg_rate: f64,
    /// Projected gradient descent learning rate.
    pub sgd_rate: f64,
    /// l1 mass of the dual variable.
    pub b_bound: f64,
    /// Maximum number of primal-dual rounds.
    pub max_rounds: usize,
    /// Iteration cap for the inner projected descent.
    pub inner_max_iters: usize,
    /// Sup-norm step tolerance for the inner projected descent.
    pub inner_tol: f64,
    /// Seed for mini-batch sampling (unused when `minibatch` is `None`).
    pub seed: u64,
    /// Constraint family being learned.
    pub spec: ConstraintSpec,
    /// Restart point for every inner solve.
    pub w_init: ConfidenceVector,
    /// Dual ascent orientation: `+1` grows multipliers on violated
    /// constraints (default), `-1` is the literal descent orientation.
    pub eg_sign: f64,
    /// Optional mini-batch size for the inner gradient steps; `None` uses
    /// the full batch (deterministic).
    pub minibatch: Option<usize>,
    /// Evaluate the max side of the gap from running averages of the
    /// per-round loss/constraint values instead of at the averaged point.
    pub gap_from_averaged_values: bool,
}

impl LearnConfig {
    /// Default hyperparameters for a constraint family: gap threshold 0.5,
    /// batch 32, EG rate 0.1, dual mass 30, descent rate 0.1 (0.01 for
    /// LogOP), initial confidence all-ones (uniform for LogOP).
    pub fn defaults_for(kind: PoolKind, k: usize) -> Result<Self> {
        let spec = ConstraintSpec::new(kind, k, ConstraintSpec::DEFAULT_LOWER_BOUND)?;
        let (sgd_rate, w_init) = match kind {
            PoolKind::LogOp => (0.01, ConfidenceVector::uniform(k)),
            _ => (0.1, ConfidenceVector::ones(k)),
        };
        Ok(Self {
            eps_gap: 0.5,
            batch_required: 32,
            eg_rate: 0.1,
            sgd_rate,
            b_bound: 30.0,
            max_rounds: 1000,
            inner_max_iters: 500,
            inner_tol: 1e-6,
            seed: 0,
            spec,
            w_init,
            eg_sign: 1.0,
            minibatch: None,
            gap_from_averaged_values: false,
        })
    }

    /// Same scalar hyperparameters retargeted at another constraint family
    /// and modality count. The descent rate carries over only within the
    /// same family; switching families picks that family's default.
    pub fn resized_for(&self, kind: PoolKind, k: usize) -> Result<Self> {
        let mut cfg = Self::defaults_for(kind, k)?;
        cfg.spec = ConstraintSpec::new(kind, k, self.spec.lower_bound())?
            .with_lb_via_projection(self.spec.lb_via_projection());
        cfg.eps_gap = self.eps_gap;
        cfg.batch_required = self.batch_required;
        cfg.eg_rate = self.eg_rate;
        cfg.b_bound = self.b_bound;
        cfg.max_rounds = self.max_rounds;
        cfg.inner_max_iters = self.inner_max_iters;
        cfg.inner_tol = self.inner_tol;
        cfg.seed = self.seed;
        cfg.eg_sign = self.eg_sign;
        cfg.minibatch = self.minibatch;
        cfg.gap_from_averaged_values = self.gap_from_averaged_values;
        if kind == self.spec.kind() {
            cfg.sgd_rate = self.sgd_rate;
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.eps_gap <= 0.0
            || self.eg_rate <= 0.0
            || self.sgd_rate <= 0.0
            || self.b_bound <= 0.0
            || self.inner_tol <= 0.0
        {
            return Err(Error::InvalidConfig(
                "rates, bounds and tolerances must be strictly positive".into(),
            ));
        }
        if self.max_rounds == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidConfig(
                "round and iteration limits must be at least 1".into(),
            ));
        }
        if self.eg_sign != 1.0 && self.eg_sign != -1.0 {
            return Err(Error::InvalidConfig(format!(
                "eg_sign must be +1 or -1, got {}",
                self.eg_sign
            )));
        }
        if self.w_init.len() != self.spec.k() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.k(),
                got: self.w_init.len(),
            });
        }
        if let Some(m) = self.minibatch {
            if m == 0 {
                return Err(Error::InvalidConfig("minibatch size must be >= 1".into()));
            }
        }
        Ok(())
    }
}

/// One gap-trace entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub l_max: f64,
    pub l_min: f64,
    pub gap: f64,
}

/// Output of [`learn`]: the learned (averaged, clamped) confidence plus the
/// full per-round traces.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnResult {
    /// Learned confidence: the averaged iterate after the final
    /// lower-bound clamp-and-redistribute.
    pub w_hat: ConfidenceVector,
    /// Rounds actually played (0 when the feasible set is a single point).
    pub rounds: usize,
    /// Per-round gap estimates.
    pub gap_trace: Vec<GapPoint>,
    /// Per-round averaged confidence iterates.
    pub w_trace: Vec<ConfidenceVector>,
    /// Per-round raw confidence iterates (before averaging).
    pub w_round_trace: Vec<ConfidenceVector>,
    /// Per-round dual iterates.
    pub lam_trace: Vec<DualVector>,
    /// True when the gap threshold was met (immediately so for singleton
    /// feasible sets).
    pub converged: bool,
}

/// Projected gradient descent on the Lagrangian at a fixed dual variable.
///
/// Iterates `w <- project(w - rho * grad L(w, lam))` from `w0`, stopping on
/// a sup-norm step below `inner_tol` or at the iteration cap.
pub fn inner_solve(
    batch: &Batch,
    lam: &DualVector,
    cfg: &LearnConfig,
    w0: &ConfidenceVector,
) -> Result<ConfidenceVector> {
    let mut tables = LossTables::new(batch);
    inner_solve_core(batch, &mut tables, lam, cfg, w0)
}

fn inner_solve_core(
    batch: &Batch,
    tables: &mut LossTables,
    lam: &DualVector,
    cfg: &LearnConfig,
    w0: &ConfidenceVector,
) -> Result<ConfidenceVector> {
    let spec = &cfg.spec;
    let w = project(w0.as_slice(), spec)?;
    if spec.is_singleton() {
        return Ok(w);
    }
    let k = spec.k();
    let mut w = w.as_slice().to_vec();
    let mut grad = vec![0.0; k];
    let mut next = vec![0.0; k];
    let mut scratch = Vec::with_capacity(k);
    let mut rng = cfg.minibatch.map(|_| ChaCha8Rng::seed_from_u64(cfg.seed));
    for _ in 0..cfg.inner_max_iters {
        match (&mut rng, cfg.minibatch) {
            (Some(rng), Some(m)) if m < batch.len() => {
                let picks = index_sample(rng, batch.len(), m);
                let sub = Batch::new(
                    picks
                        .iter()
                        .map(|i| batch.experiences()[i].clone())
                        .collect(),
                )?;
                let cv = ConfidenceVector::new(w.clone())?;
                grad.copy_from_slice(&lagrangian_gradient(&sub, &cv, lam, spec)?);
            }
            _ => {
                tables.loss_gradient_into(&w, &mut grad);
                for (g, l) in grad.iter_mut().zip(lam.lambdas()) {
                    *g -= l;
                }
            }
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure(
                "non-finite gradient in inner solve".into(),
            ));
        }
        for ((nx, wi), gi) in next.iter_mut().zip(&w).zip(&grad) {
            *nx = wi - cfg.sgd_rate * gi;
        }
        project_raw(&mut next, spec, &mut scratch);
        let step = w
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w.copy_from_slice(&next);
        if step < cfg.inner_tol {
            break;
        }
    }
    ConfidenceVector::new(w)
}

/// Exponentiated Gradient step on the scaled simplex:
/// `lam'[i] = B * lam[i] exp(sign * eta * z[i]) / sum_j lam[j] exp(...)`.
///
/// Preserves the l1 mass and nonnegativity; `z = 0` is a fixed point.
pub fn eg_update(lam: &DualVector, z: &[f64], eta: f64, sign: f64) -> Result<DualVector> {
    if z.len() != lam.lambdas().len() {
        return Err(Error::DimensionMismatch {
            expected: lam.lambdas().len(),
            got: z.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite EG update input".into()));
    }
    // Shift exponents by their maximum so large constraint values cannot
    // overflow the exponential.
    let exponents: Vec<f64> = z.iter().map(|zi| sign * eta * zi).collect();
    let max = exponents.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let scaled: Vec<f64> = lam
        .lambdas()
        .iter()
        .zip(&exponents)
        .map(|(l, e)| l * (e - max).exp())
        .collect();
    let total: f64 = scaled.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NumericalFailure(
            "EG update collapsed the dual mass to zero".into(),
        ));
    }
    DualVector::new(
        scaled.iter().map(|s| lam.b_bound() * s / total).collect(),
        lam.b_bound(),
    )
}

/// Gap components at the averaged iterates.
///
/// The max side places the whole dual mass on the worst constraint row (or
/// on the slack row when every constraint is satisfied); the min side
/// best-responds to the averaged dual with a fresh inner solve from `w0`.
pub fn estimate_gap(
    batch: &Batch,
    w_avg: &ConfidenceVector,
    lam_avg: &DualVector,
    cfg: &LearnConfig,
    w0: &ConfidenceVector,
) -> Result<(f64, f64)> {
    let mut tables = LossTables::new(batch);
    estimate_gap_core(batch, &mut tables, w_avg, lam_avg, cfg, w0)
}

fn estimate_gap_core(
    batch: &Batch,
    tables: &mut LossTables,
    w_avg: &ConfidenceVector,
    lam_avg: &DualVector,
    cfg: &LearnConfig,
    w0: &ConfidenceVector,
) -> Result<(f64, f64)> {
    let spec = &cfg.spec;
    let g_avg = constraint_values(w_avg, spec);
    let worst = g_avg.iter().fold(0.0_f64, |a, &b| a.max(b));
    let l_max = tables.loss(w_avg.as_slice()) + lam_avg.b_bound() * worst;

    let w_br = inner_solve_core(batch, tables, lam_avg, cfg, w0)?;
    let g_br = constraint_values(&w_br, spec);
    let penalty: f64 = lam_avg.lambdas()[..spec.num_inequalities()]
        .iter()
        .zip(&g_br)
        .map(|(l, g)| l * g)
        .sum();
    let l_min = tables.loss(w_br.as_slice()) + penalty;
    Ok((l_max, l_min))
}

/// Runs the full primal-dual loop and returns the averaged confidence with
/// traces. Singleton feasible sets (IOP, or any family with one modality)
/// return their unique point immediately.
pub fn learn(batch: &Batch, cfg: &LearnConfig) -> Result<LearnResult> {
    cfg.validate()?;
    let spec = &cfg.spec;
    if batch.k() != spec.k() {
        return Err(Error::DimensionMismatch {
            expected: spec.k(),
            got: batch.k(),
        });
    }
    if batch.len() < cfg.batch_required {
        return Err(Error::InsufficientData {
            required: cfg.batch_required,
            got: batch.len(),
        });
    }

    if spec.is_singleton() {
        let w = project(cfg.w_init.as_slice(), spec)?;
        return Ok(LearnResult {
            w_hat: w,
            rounds: 0,
            gap_trace: Vec::new(),
            w_trace: Vec::new(),
            w_round_trace: Vec::new(),
            lam_trace: Vec::new(),
            converged: true,
        });
    }

    let s = spec.num_inequalities();
    let k = spec.k();
    let mut tables = LossTables::new(batch);
    let mut lam = DualVector::uniform_init(s, cfg.b_bound);

    let mut w_sum = vec![0.0; k];
    let mut lam_sum = vec![0.0; s + 1];
    let mut loss_sum = 0.0;
    let mut g_sum = vec![0.0; s];

    let mut result = LearnResult {
        w_hat: cfg.w_init.clone(),
        rounds: 0,
        gap_trace: Vec::new(),
        w_trace: Vec::new(),
        w_round_trace: Vec::new(),
        lam_trace: Vec::new(),
        converged: false,
    };
    let mut best_round = 0usize;
    let mut best_gap = f64::INFINITY;

    for t in 1..=cfg.max_rounds {
        let w_t = inner_solve_core(batch, &mut tables, &lam, cfg, &cfg.w_init)?;
        let loss_t = tables.loss(w_t.as_slice());
        let g_t = constraint_values(&w_t, spec);

        for (acc, v) in w_sum.iter_mut().zip(w_t.as_slice()) {
            *acc += v;
        }
        for (acc, v) in lam_sum.iter_mut().zip(lam.lambdas()) {
            *acc += v;
        }
        loss_sum += loss_t;
        for (acc, v) in g_sum.iter_mut().zip(&g_t) {
            *acc += v;
        }
        let tf = t as f64;
        let w_avg = ConfidenceVector::new(w_sum.iter().map(|v| v / tf).collect())?;
        let lam_avg = DualVector::new(lam_sum.iter().map(|v| v / tf).collect(), cfg.b_bound)?;

        let (mut l_max, l_min) =
            estimate_gap_core(batch, &mut tables, &w_avg, &lam_avg, cfg, &cfg.w_init)?;
        if cfg.gap_from_averaged_values {
            let worst = g_sum.iter().map(|v| v / tf).fold(0.0_f64, f64::max);
            l_max = loss_sum / tf + cfg.b_bound * worst;
        }
        let gap = l_max - l_min;

        result.w_round_trace.push(w_t);
        result.lam_trace.push(lam.clone());
        result.w_trace.push(w_avg.clone());
        result.gap_trace.push(GapPoint { l_max, l_min, gap });
        result.rounds = t;

        if gap < best_gap {
            best_gap = gap;
            best_round = t;
        }
        if gap <= cfg.eps_gap {
            result.converged = true;
            result.w_hat = redistribute_to_lower_bound(&w_avg, spec);
            return Ok(result);
        }

        let mut z = g_t;
        z.push(0.0); // slack row for the augmented dual
        lam = eg_update(&lam, &z, cfg.eg_rate, cfg.eg_sign)?;
    }

    // Round limit reached: keep the averaged iterate with the best gap.
    let w_best = result.w_trace[best_round - 1].clone();
    result.w_hat = redistribute_to_lower_bound(&w_best, spec);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Categorical;
    use crate::loss::{batch_loss, Experience, Meta};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn cat(w: &[f64]) -> Categorical {
        Categorical::normalize(w).unwrap()
    }

    #[test]
    fn dual_uniform_init_splits_mass() {
        let lam = DualVector::uniform_init(3, 30.0);
        assert_eq!(lam.lambdas().len(), 4);
        for l in lam.lambdas() {
            assert_relative_eq!(*l, 7.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn eg_zero_input_is_fixed_point() {
        let lam = DualVector::new(vec![3.0, 17.0, 10.0], 30.0).unwrap();
        let next = eg_update(&lam, &[0.0, 0.0, 0.0], 0.1, 1.0).unwrap();
        for (a, b) in lam.lambdas().iter().zip(next.lambdas()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn eg_scalar_arithmetic_oracle() {
        // 30 * (e^0.1, 1, 1) / (e^0.1 + 2) for an even start and z = (1,0,0).
        let lam = DualVector::new(vec![10.0, 10.0, 10.0], 30.0).unwrap();
        let next = eg_update(&lam, &[1.0, 0.0, 0.0], 0.1, 1.0).unwrap();
        let e = 0.1_f64.exp();
        assert_relative_eq!(next.lambdas()[0], 30.0 * e / (e + 2.0), epsilon = 1e-12);
        assert_relative_eq!(next.lambdas()[1], 30.0 / (e + 2.0), epsilon = 1e-12);
        assert_relative_eq!(next.lambdas()[2], 30.0 / (e + 2.0), epsilon = 1e-12);
    }

    #[test]
    fn eg_preserves_simplex() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut lam = DualVector::uniform_init(4, 30.0);
        for _ in 0..500 {
            let z: Vec<f64> = (0..5).map(|_| rng.gen_range(-5.0..5.0)).collect();
            lam = eg_update(&lam, &z, 0.1, 1.0).unwrap();
            let sum: f64 = lam.lambdas().iter().sum();
            assert!((sum - 30.0).abs() < 1e-9);
            assert!(lam.lambdas().iter().all(|l| *l >= 0.0));
        }
    }

    #[test]
    fn eg_rejects_non_finite() {
        let lam = DualVector::uniform_init(2, 30.0);
        assert!(matches!(
            eg_update(&lam, &[f64::NAN, 0.0, 0.0], 0.1, 1.0),
            Err(Error::NumericalFailure(_))
        ));
    }

    fn peaked_at(n: usize, truth: usize, peak: f64) -> Categorical {
        let mut w = vec![(1.0 - peak) / (n - 1) as f64; n];
        w[truth] = peak;
        cat(&w)
    }

    fn informative_batch(k: usize, n: usize, size: usize, seed: u64) -> Batch {
        // Modality 0 is sharply correct (peak 0.9 on the truth, blunter than
        // the one-hot advice); the others are uniform.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let records = (0..size)
            .map(|_| {
                let truth = rng.gen_range(0..n);
                let advice = Categorical::one_hot(n, truth).unwrap();
                let mut bases = vec![peaked_at(n, truth, 0.9)];
                for _ in 1..k {
                    bases.push(cat(&vec![1.0; n]));
                }
                Experience::new(bases, advice, Meta::default()).unwrap()
            })
            .collect();
        Batch::new(records).unwrap()
    }

    #[test]
    fn inner_solve_singleton_logop_k1() {
        let batch = informative_batch(1, 4, 4, 1);
        let cfg = LearnConfig::defaults_for(PoolKind::LogOp, 1).unwrap();
        let lam = DualVector::zeros(1, 30.0);
        let w = inner_solve(&batch, &lam, &cfg, &cfg.w_init).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn inner_solve_pushes_informative_modality_to_edge() {
        // With a zero dual, sharpening the correct modality keeps lowering
        // the cross entropy against one-hot advice, so the optimum over
        // {sum = 2, w >= 0} sits at (2, 0). Cross-checked by a grid search
        // over the segment.
        let batch = informative_batch(2, 5, 8, 2);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 2).unwrap();
        cfg.inner_max_iters = 2000;
        let lam = DualVector::zeros(2, 30.0);
        let w = inner_solve(&batch, &lam, &cfg, &cfg.w_init).unwrap();

        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=200 {
            let x = i as f64 * 0.01;
            let l = batch_loss(
                &batch,
                &ConfidenceVector::new(vec![x, (2.0 - x).max(0.0)]).unwrap(),
            )
            .unwrap();
            if l < best.0 {
                best = (l, x);
            }
        }
        assert_relative_eq!(best.1, 2.0, epsilon = 1e-9);
        assert!(w.as_slice()[0] > 1.95, "got {:?}", w.as_slice());
    }

    #[test]
    fn inner_solve_is_deterministic() {
        let batch = informative_batch(3, 6, 16, 3);
        let cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        let lam = DualVector::uniform_init(3, 30.0);
        let a = inner_solve(&batch, &lam, &cfg, &cfg.w_init).unwrap();
        let b = inner_solve(&batch, &lam, &cfg, &cfg.w_init).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_gap_slack_row_takes_mass_when_feasible() {
        let batch = informative_batch(2, 4, 8, 4);
        let cfg = LearnConfig::defaults_for(PoolKind::Eiop, 2).unwrap();
        let w = ConfidenceVector::new(vec![1.2, 0.8]).unwrap(); // inside bounds
        let lam = DualVector::uniform_init(2, 30.0);
        let (l_max, _) = estimate_gap(&batch, &w, &lam, &cfg, &cfg.w_init).unwrap();
        assert_relative_eq!(l_max, batch_loss(&batch, &w).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn learn_iop_short_circuits() {
        let batch = informative_batch(3, 5, 32, 5);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Iop, 3).unwrap();
        cfg.w_init = ConfidenceVector::ones(3);
        let result = learn(&batch, &cfg).unwrap();
        assert!(result.converged);
        assert_eq!(result.rounds, 0);
        assert_eq!(result.w_hat.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn learn_rejects_small_batch() {
        let batch = informative_batch(2, 4, 8, 6);
        let cfg = LearnConfig::defaults_for(PoolKind::Eiop, 2).unwrap(); // requires 32
        assert!(matches!(
            learn(&batch, &cfg),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn learn_recovers_informative_modality_with_lower_bounds() {
        // Modality 2 is sharply correct, 0 and 1 are uniform: the loss keeps
        // falling as w_2 grows, so the optimum under the 0.1 lower bound is
        // (0.1, 0.1, 2.8) with both bounds active. Cross-checked against a
        // grid search over the scaled simplex restricted to the bounds.
        let n = 10;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let records = (0..32)
            .map(|_| {
                let truth = rng.gen_range(0..n);
                let advice = Categorical::one_hot(n, truth).unwrap();
                let bases = vec![
                    cat(&vec![1.0; n]),
                    cat(&vec![1.0; n]),
                    peaked_at(n, truth, 0.5),
                ];
                Experience::new(bases, advice, Meta::default()).unwrap()
            })
            .collect();
        let batch = Batch::new(records).unwrap();

        let mut best = (f64::INFINITY, vec![0.0; 3]);
        let steps = (2.8 / 0.005) as usize;
        for i in 0..=steps {
            let w0 = 0.1 + i as f64 * 0.005;
            for j in 0..=(steps - i) {
                let w1 = 0.1 + j as f64 * 0.005;
                let w2 = 3.0 - w0 - w1;
                if w2 < 0.1 - 1e-12 {
                    continue;
                }
                let l =
                    batch_loss(&batch, &ConfidenceVector::new(vec![w0, w1, w2]).unwrap()).unwrap();
                if l < best.0 {
                    best = (l, vec![w0, w1, w2]);
                }
            }
        }
        assert!((best.1[2] - 2.8).abs() < 0.01, "grid best {:?}", best.1);

        // The loss surface is flat in the uniform modalities, so the default
        // gap threshold stops long before the averaged weights settle; a
        // tight threshold and a faster dual rate (shorter transient in the
        // running average) recover the exact constrained optimum.
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        cfg.eps_gap = 0.05;
        cfg.eg_rate = 0.5;
        cfg.max_rounds = 2000;
        let result = learn(&batch, &cfg).unwrap();
        assert!(result.converged);
        let w = result.w_hat.as_slice();
        assert!((w[0] - 0.1).abs() < 0.05, "w = {w:?}");
        assert!((w[1] - 0.1).abs() < 0.05, "w = {w:?}");
        assert!((w[2] - 2.8).abs() < 0.05, "w = {w:?}");
    }

    #[test]
    fn learn_is_deterministic() {
        let batch = informative_batch(3, 6, 32, 8);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        cfg.max_rounds = 40;
        cfg.eps_gap = 1e-9; // force the full round budget
        let a = learn(&batch, &cfg).unwrap();
        let b = learn(&batch, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learn_dual_trajectory_stays_on_simplex() {
        let batch = informative_batch(3, 6, 32, 9);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        cfg.max_rounds = 60;
        cfg.eps_gap = 1e-9;
        let result = learn(&batch, &cfg).unwrap();
        for lam in &result.lam_trace {
            let sum: f64 = lam.lambdas().iter().sum();
            assert!((sum - cfg.b_bound).abs() < 1e-9);
            assert!(lam.lambdas().iter().all(|l| *l >= 0.0));
        }
    }

    #[test]
    fn averaged_trace_recomputes_from_raw_trace() {
        let batch = informative_batch(3, 6, 32, 10);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        cfg.max_rounds = 30;
        cfg.eps_gap = 1e-9;
        let result = learn(&batch, &cfg).unwrap();
        let mut sums = vec![0.0; 3];
        for (t, w_t) in result.w_round_trace.iter().enumerate() {
            for (s, v) in sums.iter_mut().zip(w_t.as_slice()) {
                *s += v;
            }
            let avg = &result.w_trace[t];
            for (s, a) in sums.iter().zip(avg.as_slice()) {
                assert!((s / (t + 1) as f64 - a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn learned_weights_dominate_all_ones_on_training_loss() {
        for seed in [11, 12, 13] {
            let batch = informative_batch(3, 8, 32, seed);
            let cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
            let result = learn(&batch, &cfg).unwrap();
            let learned = batch_loss(&batch, &result.w_hat).unwrap();
            let ones = batch_loss(&batch, &ConfidenceVector::ones(3)).unwrap();
            assert!(learned <= ones + 1e-6, "{learned} vs {ones}");
        }
    }

    #[test]
    fn gap_is_never_meaningfully_negative() {
        let batch = informative_batch(3, 6, 32, 14);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        cfg.max_rounds = 50;
        cfg.eps_gap = 1e-9;
        let result = learn(&batch, &cfg).unwrap();
        for p in &result.gap_trace {
            assert!(p.gap >= -1e-8, "gap {}", p.gap);
        }
    }

    #[test]
    fn literal_descent_sign_is_available() {
        let batch = informative_batch(2, 4, 32, 15);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 2).unwrap();
        cfg.eg_sign = -1.0;
        cfg.max_rounds = 10;
        let result = learn(&batch, &cfg);
        assert!(result.is_ok());
    }
}
