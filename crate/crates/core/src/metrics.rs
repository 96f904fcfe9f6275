//! Fusion quality evaluation: accuracy (mean probability mass on the true
//! intention), Shannon entropy, score difference and success rate over a
//! dataset, plus the ablation runner across modality subsets and fusion
//! methods.

use crate::error::{Error, Result};
use crate::learner::{learn, LearnConfig};
use crate::loss::Batch;
use crate::opinion_pool::{fuse, iop_weights, ConfidenceVector, PoolKind};

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub subset: Vec<usize>,
    pub subset_label: String,
    pub method: String,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub entropy_mean: f64,
    pub entropy_std: f64,
    pub score_diff_mean: f64,
    pub score_diff_std: f64,
    /// Percent of records whose fused argmax equals the true intention.
    pub success_rate: f64,
    /// Learned confidence, when the method was learned.
    pub confidence: Option<Vec<f64>>,
}

/// An ordered collection of rows with a CSV rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "subset,method,accuracy_mean,accuracy_std,entropy_mean,entropy_std,scorediff_mean,scorediff_std,success_rate,confidence";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let confidence = row
                .confidence
                .as_ref()
                .map(|w| {
                    w.iter()
                        .map(|v| format!("{v:.6}"))
                        .collect::<Vec<_>>()
                        .join("~")
                })
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                row.subset_label,
                row.method,
                row.accuracy_mean,
                row.accuracy_std,
                row.entropy_mean,
                row.entropy_std,
                row.score_diff_mean,
                row.score_diff_std,
                row.success_rate,
                confidence
            ));
        }
        out
    }
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluates a weighted fusion of the selected modalities over a dataset.
///
/// Per record: the fused distribution's mass on the true intention
/// (accuracy), its entropy and score difference, and whether its argmax hits
/// the truth. Aggregates report mean and population standard deviation.
pub fn evaluate(
    data: &Batch,
    subset: &[usize],
    weights: &ConfidenceVector,
    method: &str,
) -> Result<MetricsRow> {
    if subset.is_empty() {
        return Err(Error::InvalidConfig("empty modality subset".into()));
    }
    if weights.len() != subset.len() {
        return Err(Error::DimensionMismatch {
            expected: subset.len(),
            got: weights.len(),
        });
    }
    let mut accuracy = Vec::with_capacity(data.len());
    let mut entropy = Vec::with_capacity(data.len());
    let mut score_diff = Vec::with_capacity(data.len());
    let mut successes = 0usize;
    for x in data.experiences() {
        let selected = x.select_modalities(subset)?;
        let fused = fuse(selected.bases(), weights)?;
        let truth = x.true_index();
        accuracy.push(fused.probs()[truth]);
        entropy.push(fused.entropy());
        score_diff.push(fused.score_difference(truth)?);
        if fused.argmax_tiebreak() == truth {
            successes += 1;
        }
    }
    let (accuracy_mean, accuracy_std) = mean_and_population_std(&accuracy);
    let (entropy_mean, entropy_std) = mean_and_population_std(&entropy);
    let (score_diff_mean, score_diff_std) = mean_and_population_std(&score_diff);
    Ok(MetricsRow {
        subset: subset.to_vec(),
        subset_label: subset
            .iter()
            .map(|i| format!("m{i}"))
            .collect::<Vec<_>>()
            .join("+"),
        method: method.to_string(),
        accuracy_mean,
        accuracy_std,
        entropy_mean,
        entropy_std,
        score_diff_mean,
        score_diff_std,
        success_rate: 100.0 * successes as f64 / data.len() as f64,
        confidence: None,
    })
}

fn relabel(row: &mut MetricsRow, names: Option<&[String]>) {
    if let Some(names) = names {
        row.subset_label = row
            .subset
            .iter()
            .map(|i| names.get(*i).cloned().unwrap_or_else(|| format!("m{i}")))
            .collect::<Vec<_>>()
            .join("+");
    }
}

/// Every nonempty modality subset in deterministic order: by size, then
/// lexicographically.
pub fn modality_subsets(k: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << k))
        .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

/// Table-style ablation: raw single modalities, IOP on every multi-modality
/// subset, and the requested learned methods (EIOP and/or LogOP) trained on
/// the first `batch_required` records and evaluated on the rest.
///
/// IOP and raw rows are evaluated on the same held-out remainder so rows are
/// comparable.
pub fn ablation(
    data: &Batch,
    methods: &[PoolKind],
    cfg: &LearnConfig,
    names: Option<&[String]>,
) -> Result<MetricsReport> {
    if data.len() <= cfg.batch_required {
        return Err(Error::InsufficientData {
            required: cfg.batch_required + 1,
            got: data.len(),
        });
    }
    let (train, eval) = data.split_at(cfg.batch_required)?;
    let learned_methods: Vec<PoolKind> = methods
        .iter()
        .copied()
        .filter(|m| *m != PoolKind::Iop)
        .collect();
    let include_iop = methods.contains(&PoolKind::Iop);

    let mut rows = Vec::new();
    for subset in modality_subsets(data.k()) {
        if subset.len() == 1 {
            let mut row = evaluate(&eval, &subset, &iop_weights(1), "--")?;
            relabel(&mut row, names);
            rows.push(row);
            continue;
        }
        if include_iop {
            let mut row = evaluate(&eval, &subset, &iop_weights(subset.len()), "IOP")?;
            relabel(&mut row, names);
            rows.push(row);
        }
        for kind in &learned_methods {
            let sub_cfg = cfg.resized_for(*kind, subset.len())?;
            let train_subset = train.select_modalities(&subset)?;
            let learned = learn(&train_subset, &sub_cfg)?;
            let mut row = evaluate(&eval, &subset, &learned.w_hat, kind.as_str())?;
            row.confidence = Some(learned.w_hat.as_slice().to_vec());
            relabel(&mut row, names);
            rows.push(row);
        }
    }
    Ok(MetricsReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Categorical;
    use crate::loss::{Experience, Meta};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cat(w: &[f64]) -> Categorical {
        Categorical::normalize(w).unwrap()
    }

    fn random_batch(seed: u64, size: usize, k: usize, n: usize) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..size)
            .map(|_| {
                let truth = rng.gen_range(0..n);
                let bases = (0..k)
                    .map(|_| cat(&(0..n).map(|_| rng.gen_range(0.05..1.0)).collect::<Vec<_>>()))
                    .collect();
                Experience::new(
                    bases,
                    Categorical::one_hot(n, truth).unwrap(),
                    Meta {
                        true_index: Some(truth),
                        scenario: None,
                    },
                )
                .unwrap()
            })
            .collect();
        Batch::new(records).unwrap()
    }

    #[test]
    fn singleton_subset_reports_raw_modality() {
        let data = random_batch(1, 20, 3, 5);
        let row = evaluate(&data, &[1], &ConfidenceVector::ones(1), "--").unwrap();
        // Recompute directly from the raw base distributions.
        let mut acc = 0.0;
        let mut ent = 0.0;
        for x in data.experiences() {
            let base = &x.bases()[1];
            acc += base.probs()[x.true_index()];
            ent += base.entropy();
        }
        assert_relative_eq!(row.accuracy_mean, acc / 20.0, epsilon = 1e-9);
        assert_relative_eq!(row.entropy_mean, ent / 20.0, epsilon = 1e-9);
    }

    #[test]
    fn perfect_bases_score_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let records = (0..10)
            .map(|_| {
                let truth = rng.gen_range(0..4);
                let advice = Categorical::one_hot(4, truth).unwrap();
                Experience::new(
                    vec![advice.clone(), advice.clone()],
                    advice.clone(),
                    Meta {
                        true_index: Some(truth),
                        scenario: None,
                    },
                )
                .unwrap()
            })
            .collect();
        let data = Batch::new(records).unwrap();
        let row = evaluate(&data, &[0, 1], &ConfidenceVector::ones(2), "IOP").unwrap();
        assert!(row.accuracy_mean > 0.999);
        assert!(row.entropy_mean < 1e-3);
        assert_relative_eq!(row.success_rate, 100.0, epsilon = 1e-12);
    }

    #[test]
    fn metrics_invariant_under_intention_relabeling() {
        let data = random_batch(3, 16, 2, 4);
        let perm = [2usize, 0, 3, 1];
        let relabeled = Batch::new(
            data.experiences()
                .iter()
                .map(|x| {
                    let remap = |c: &Categorical| {
                        let mut probs = vec![0.0; 4];
                        for (i, p) in c.probs().iter().enumerate() {
                            probs[perm[i]] = *p;
                        }
                        Categorical::from_probs(&probs).unwrap()
                    };
                    Experience::new(
                        x.bases().iter().map(remap).collect(),
                        remap(x.advice()),
                        Meta {
                            true_index: x.meta().true_index.map(|t| perm[t]),
                            scenario: None,
                        },
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let w = ConfidenceVector::ones(2);
        let a = evaluate(&data, &[0, 1], &w, "IOP").unwrap();
        let b = evaluate(&relabeled, &[0, 1], &w, "IOP").unwrap();
        assert_relative_eq!(a.accuracy_mean, b.accuracy_mean, epsilon = 1e-12);
        assert_relative_eq!(a.entropy_mean, b.entropy_mean, epsilon = 1e-12);
        assert_relative_eq!(a.success_rate, b.success_rate, epsilon = 1e-12);
    }

    #[test]
    fn success_rate_consistent_with_positive_score_difference() {
        let data = random_batch(4, 40, 3, 6);
        let w = ConfidenceVector::ones(3);
        let row = evaluate(&data, &[0, 1, 2], &w, "IOP").unwrap();
        let mut positive = 0usize;
        for x in data.experiences() {
            let fused = fuse(x.bases(), &w).unwrap();
            if fused.score_difference(x.true_index()).unwrap() > 0.0 {
                positive += 1;
            }
        }
        assert!(row.success_rate >= 100.0 * positive as f64 / data.len() as f64 - 1e-9);
    }

    #[test]
    fn subset_enumeration_order() {
        let subsets = modality_subsets(3);
        assert_eq!(
            subsets,
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2],
            ]
        );
    }

    #[test]
    fn ablation_row_combinatorics() {
        let data = random_batch(5, 40, 3, 5);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        cfg.batch_required = 16;
        cfg.max_rounds = 30;
        let report = ablation(&data, &[PoolKind::Iop, PoolKind::Eiop], &cfg, None).unwrap();
        // 3 raw rows + 4 multi subsets * (IOP + EIOP).
        assert_eq!(report.rows.len(), 3 + 4 * 2);
        let csv = report.to_csv();
        assert!(csv.starts_with(MetricsReport::CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + report.rows.len());
    }

    #[test]
    fn ablation_ceiling_case_dominates() {
        // Modality 0 is perfect, the rest are uniform: its single-modality
        // row tops everything and trimodal EIOP matches it closely.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 5;
        let records = (0..72)
            .map(|_| {
                let truth = rng.gen_range(0..n);
                let advice = Categorical::one_hot(n, truth).unwrap();
                Experience::new(
                    vec![advice.clone(), cat(&vec![1.0; n]), cat(&vec![1.0; n])],
                    advice.clone(),
                    Meta {
                        true_index: Some(truth),
                        scenario: None,
                    },
                )
                .unwrap()
            })
            .collect();
        let data = Batch::new(records).unwrap();
        let cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        let report = ablation(&data, &[PoolKind::Iop, PoolKind::Eiop], &cfg, None).unwrap();
        let single = report
            .rows
            .iter()
            .find(|r| r.subset == vec![0])
            .unwrap()
            .accuracy_mean;
        let trimodal_eiop = report
            .rows
            .iter()
            .find(|r| r.subset == vec![0, 1, 2] && r.method == "EIOP")
            .unwrap()
            .accuracy_mean;
        for row in &report.rows {
            assert!(row.accuracy_mean <= single + 1e-9);
        }
        assert!((single - trimodal_eiop).abs() < 0.05);
    }

    #[test]
    fn ablation_insufficient_records() {
        let data = random_batch(7, 30, 3, 5);
        let cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap(); // needs 32 + 1
        assert!(matches!(
            ablation(&data, &[PoolKind::Iop], &cfg, None),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn named_labels_apply() {
        let data = random_batch(8, 40, 3, 5);
        let mut cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        cfg.batch_required = 16;
        cfg.max_rounds = 20;
        let names = vec![
            "speech".to_string(),
            "gesture".to_string(),
            "gaze".to_string(),
        ];
        let report = ablation(&data, &[PoolKind::Iop], &cfg, Some(&names)).unwrap();
        assert!(report.rows.iter().any(|r| r.subset_label == "speech"));
        assert!(report
            .rows
            .iter()
            .any(|r| r.subset_label == "speech+gesture+gaze"));
    }
}
