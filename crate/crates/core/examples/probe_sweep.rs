use bmclop::loss::{batch_loss, Batch};
use bmclop::opinion_pool::ConfidenceVector;
use bmclop::simulation::{banded_confusion, generate_batch, ModalityNoise, Object, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scene(spacing: f64, dy: f64, aligned: bool) -> Scenario {
    // 2 rows x 5 columns; bins follow columns; categories are column pairs
    // when aligned, else two pairs are swapped diagonally.
    let mut objects = Vec::new();
    for row in 0..2 {
        for col in 0..5usize {
            let id = row * 5 + col;
            let cat = if aligned || row == 0 {
                col
            } else {
                match col {
                    0 => 1,
                    1 => 0,
                    c => c,
                }
            };
            objects.push(Object {
                id,
                category: cat,
                direction: 4 - col,
                position: (
                    (col as f64 - 2.0) * spacing,
                    0.45 + row as f64 * dy,
                ),
            });
        }
    }
    Scenario::new("scenario2s", objects, 5).unwrap()
}

fn grid_min(batch: &Batch) -> [f64; 3] {
    let mut best = (f64::INFINITY, [0.0; 3]);
    let step = 0.05;
    let n0 = (3.0 / step) as usize;
    for i in 0..=n0 {
        let w0 = i as f64 * step;
        for j in 0..=(n0 - i) {
            let w1 = j as f64 * step;
            let w2 = (3.0 - w0 - w1).max(0.0);
            let l = batch_loss(batch, &ConfidenceVector::new(vec![w0, w1, w2]).unwrap()).unwrap();
            if l < best.0 {
                best = (l, [w0, w1, w2]);
            }
        }
    }
    best.1
}

fn main() {
    let mut results: Vec<(String, [f64; 3], [f64; 3], usize, Vec<[f64; 3]>)> = Vec::new();
    for &aligned in &[true, false] {
        for &spacing in &[0.15, 0.18, 0.22] {
            for &dy in &[0.4, 0.5] {
                for &fix_scale in &[0.4, 0.5] {
                    for &confu in &[0.25, 0.3] {
                        for &diag in &[0.75, 0.8] {
                            let adj = (1.0 - diag - 0.04) / 2.0;
                            let sc = scene(spacing, dy, aligned);
                            let noise = ModalityNoise::new(
                                confu,
                                0.8,
                                banded_confusion(5, &[diag, adj, 0.02]),
                                [[0.01, 0.0], [0.0, 0.1]],
                                fix_scale,
                                1e-6,
                            )
                            .unwrap();
                            let mut rng = ChaCha8Rng::seed_from_u64(123);
                            let big = generate_batch(&sc, 600, &noise, &mut rng).unwrap();
                            let mut h = [0.0f64; 3];
                            let mut succ = [0.0f64; 3];
                            for x in big.experiences() {
                                let t = x.true_index();
                                for (i, b) in x.bases().iter().enumerate() {
                                    h[i] += b.entropy() / 600.0;
                                    if b.argmax_tiebreak() == t {
                                        succ[i] += 1.0 / 6.0;
                                    }
                                }
                            }
                            let brackets_ok = (1.4..=2.2).contains(&h[0])
                                && (1.1..=1.8).contains(&h[1])
                                && (0.9..=1.4).contains(&h[2]);
                            if !brackets_ok {
                                continue;
                            }
                            let mut ordered = 0;
                            let mut ws = Vec::new();
                            for seed in 1..=5u64 {
                                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                                let train = generate_batch(&sc, 32, &noise, &mut rng).unwrap();
                                let w = grid_min(&train);
                                if w[2] > w[1] && w[1] > w[0] {
                                    ordered += 1;
                                }
                                ws.push(w);
                            }
                            let label = format!(
                                "al{} sp{spacing} dy{dy} fs{fix_scale} cf{confu} d{diag}",
                                aligned as u8
                            );
                            results.push((label, h, succ, ordered, ws));
                        }
                    }
                }
            }
        }
    }
    results.sort_by(|a, b| b.3.cmp(&a.3));
    for (label, h, succ, ordered, ws) in results.iter().take(12) {
        println!(
            "{label}: ordered {ordered}/5  H=({:.2},{:.2},{:.2}) succ=({:.0},{:.0},{:.0})",
            h[0], h[1], h[2], succ[0], succ[1], succ[2]
        );
        let fmt: Vec<String> = ws.iter().map(|w| format!("({:.2},{:.2},{:.2})", w[0], w[1], w[2])).collect();
        println!("   grid optima: {}", fmt.join(" "));
    }
    println!("{} configs passed brackets", results.len());
}
