use dedvad::classifier::svm_objective;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Minimizes the objective over a grid in (w1, w2, b), zooming in around the
/// best cell a few times.
pub fn grid_oracle(x: &Array2<f64>, y: &[u8], sw: &[f64], c: f64) -> f64 {
    let mut center = [0.0, 0.0, 0.0];
    let mut half = 8.0;
    let steps = 40;
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let mut arg = center;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let at = |idx: usize, c: f64| c - half + 2.0 * half * idx as f64 / steps as f64;
                    let w = [at(i, center[0]), at(j, center[1])];
                    let b = at(k, center[2]);
                    let obj = svm_objective(x.view(), y, sw, &w, b, c);
                    if obj < best {
                        best = obj;
                        arg = [w[0], w[1], b];
                    }
                }
            }
        }
        center = arg;
        half *= 0.25;
    }
    best
}

/// Overlapping 2-D classes, 20 to 50 points.
pub fn instance(seed: u64) -> (Array2<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(20..=50);
    let g = Normal::new(0.0, 1.0).unwrap();
    let shift = rng.gen_range(0.5..3.0);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::new();
    for i in 0..n {
        let label = rng.gen_bool(0.4) as u8;
        let label = if i < 2 { i as u8 } else { label };
        let c = if label == 1 { shift } else { 0.0 };
        x[[i, 0]] = c + g.sample(&mut rng);
        x[[i, 1]] = c * 0.5 + g.sample(&mut rng);
        y.push(label);
    }
    (x, y)
}

/// Two blobs in the box `[0, 1]²` around centers `gap` apart, so the margin
/// exceeds `gap − 1`.
pub fn separable(seed: u64, n: usize, gap: f64) -> (Array2<f64>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let c = if label == 1 { gap } else { 0.0 };
        x[[i, 0]] = c + rng.gen_range(0.0..1.0);
        x[[i, 1]] = c + rng.gen_range(0.0..1.0);
        y.push(label);
    }
    (x, y)
}
