use bmclop::loss::{batch_loss, Batch};
use bmclop::opinion_pool::ConfidenceVector;
use bmclop::simulation::{generate_batch, scenario2, ModalityNoise, Object, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scaled_scenario(scale_x: f64, scale_y: f64) -> Scenario {
    let base = scenario2();
    let objects: Vec<Object> = base
        .objects()
        .iter()
        .map(|o| Object {
            id: o.id,
            category: o.category,
            direction: o.direction,
            position: (o.position.0 * scale_x, 0.45 + (o.position.1 - 0.45) * scale_y),
        })
        .collect();
    Scenario::new("scenario2-scaled", objects, 5).unwrap()
}

fn grid_min(batch: &Batch) -> (f64, [f64; 3]) {
    let mut best = (f64::INFINITY, [0.0; 3]);
    let step = 0.02;
    let n0 = (3.0 / step) as usize;
    for i in 0..=n0 {
        let w0 = i as f64 * step;
        for j in 0..=(n0 - i) {
            let w1 = j as f64 * step;
            let w2 = 3.0 - w0 - w1;
            let l = batch_loss(batch, &ConfidenceVector::new(vec![w0, w1, w2.max(0.0)]).unwrap())
                .unwrap();
            if l < best.0 {
                best = (l, [w0, w1, w2]);
            }
        }
    }
    best
}

fn main() {
    for (sx, sy) in [(1.0, 1.0), (0.8, 0.8), (0.7, 0.8)] {
        let sc = scaled_scenario(sx, sy);
        let noise = ModalityNoise::default();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let big = generate_batch(&sc, 1000, &noise, &mut rng).unwrap();
        let mut h = [0.0f64; 3];
        let mut succ = [0.0f64; 3];
        for x in big.experiences() {
            let t = x.true_index();
            for (i, b) in x.bases().iter().enumerate() {
                h[i] += b.entropy();
                if b.argmax_tiebreak() == t {
                    succ[i] += 1.0;
                }
            }
        }
        println!(
            "scale=({sx},{sy}): H=(sp {:.3}, ge {:.3}, gz {:.3}) succ=(sp {:.1}, ge {:.1}, gz {:.1})",
            h[0] / 1000.0, h[1] / 1000.0, h[2] / 1000.0,
            succ[0] / 10.0, succ[1] / 10.0, succ[2] / 10.0
        );
        for seed in 1..=5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let train = generate_batch(&sc, 32, &noise, &mut rng).unwrap();
            let (l, w) = grid_min(&train);
            let ordered = w[2] > w[1] && w[1] > w[0];
            println!(
                "  seed {seed}: grid opt w=({:.2},{:.2},{:.2}) loss={:.4} ordered={ordered}",
                w[0], w[1], w[2], l
            );
        }
    }
}
