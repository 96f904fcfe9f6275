use bmclop::learner::{learn, LearnConfig};
use bmclop::metrics::{ablation, evaluate};
use bmclop::opinion_pool::{ConfidenceVector, PoolKind};
use bmclop::simulation::{generate_batch, scenario2, ModalityNoise};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let sc = scenario2();
    let noise = ModalityNoise::default();

    // Per-modality stats over 1000 single-modality draws.
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let batch = generate_batch(&sc, 1000, &noise, &mut rng).unwrap();
    let names = ["speech", "gesture", "gaze"];
    for (i, name) in names.iter().enumerate() {
        let row = evaluate(&batch, &[i], &ConfidenceVector::ones(1), name).unwrap();
        println!(
            "{name:8} acc={:.3} ({:.3})  H={:.3} ({:.3})  sd={:.4}  succ={:.2}%",
            row.accuracy_mean,
            row.accuracy_std,
            row.entropy_mean,
            row.entropy_std,
            row.score_diff_mean,
            row.success_rate
        );
    }

    // E[ln p(true)] per modality: what the learner actually ranks on.
    let mut eln = [0.0f64; 3];
    for x in batch.experiences() {
        let t = x.true_index();
        for (i, b) in x.bases().iter().enumerate() {
            eln[i] += b.probs()[t].ln();
        }
    }
    for (i, name) in names.iter().enumerate() {
        println!("{name:8} E[ln p(true)] = {:.4}", eln[i] / batch.len() as f64);
    }

    // Criterion-6-style trend check across 5 seeds.
    let start = Instant::now();
    let mut orderings = 0;
    let mut iop_wins = 0;
    let mut eiop_ge = 0;
    for seed in 1..=5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = generate_batch(&sc, 32 + 75, &noise, &mut rng).unwrap();
        let cfg = LearnConfig::defaults_for(PoolKind::Eiop, 3).unwrap();
        let report = ablation(&data, &[PoolKind::Iop, PoolKind::Eiop], &cfg, None).unwrap();
        let acc = |label: &str, method: &str| {
            report
                .rows
                .iter()
                .find(|r| r.subset_label == label && r.method == method)
                .map(|r| (r.accuracy_mean, r.success_rate, r.confidence.clone()))
                .unwrap()
        };
        let tri_iop = acc("m0+m1+m2", "IOP");
        let tri_eiop = acc("m0+m1+m2", "EIOP");
        let bi: Vec<_> = ["m0+m1", "m0+m2", "m1+m2"]
            .iter()
            .map(|l| acc(l, "IOP").0)
            .collect();
        let w = tri_eiop.2.unwrap();
        let ordered = w[2] > w[1] && w[1] > w[0];
        if ordered {
            orderings += 1;
        }
        if bi.iter().all(|b| tri_iop.0 > *b) {
            iop_wins += 1;
        }
        if tri_eiop.1 >= tri_iop.1 {
            eiop_ge += 1;
        }
        println!(
            "seed {seed}: tri IOP acc={:.3} succ={:.1} | tri EIOP acc={:.3} succ={:.1} w=({:.3},{:.3},{:.3}) ordered={} | bi acc=({:.3},{:.3},{:.3})",
            tri_iop.0, tri_iop.1, tri_eiop.0, tri_eiop.1, w[0], w[1], w[2], ordered, bi[0], bi[1], bi[2]
        );
    }
    println!(
        "trimodal-beats-bimodal {iop_wins}/5, EIOP>=IOP success {eiop_ge}/5, ordering {orderings}/5, elapsed {:.1?}",
        start.elapsed()
    );
}
