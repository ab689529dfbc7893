//! Seeded generators for test fixtures and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, LabeledPoint};
use crate::network::{Activation, Interval, Layer, Network};

/// Two-label points in vertical bands: band `b` spans `x in [b, b + 0.8]`,
/// `y in [0, 1]`, and carries label `b % 2`. Neighbouring bands alternate
/// labels, so proximity alone cannot separate them.
pub fn banded_toy(seed: u64, bands: usize, per_band: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(bands * per_band);
    for b in 0..bands {
        for _ in 0..per_band {
            let x = b as f64 + rng.gen_range(0.0..0.8);
            let y = rng.gen_range(0.0..1.0);
            points.push(LabeledPoint::new(vec![x, y], b % 2));
        }
    }
    Dataset::new(points, Some(2)).expect("generated points are valid")
}

/// Fully connected ReLU network with weights and biases drawn from
/// `U[-scale, scale]`. `dims` lists every layer width, input first.
pub fn random_network(
    seed: u64,
    dims: &[usize],
    scale: f64,
    input_bounds: Option<Vec<Interval>>,
) -> Network {
    assert!(dims.len() >= 2, "need an input and an output width");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let rows = (0..w[1])
                .map(|_| (0..w[0]).map(|_| rng.gen_range(-scale..=scale)).collect())
                .collect();
            let bias = (0..w[1]).map(|_| rng.gen_range(-scale..=scale)).collect();
            let act = if i == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            Layer::new(rows, bias, act).expect("generated layer is valid")
        })
        .collect();
    Network::new(dims[0], layers, input_bounds).expect("generated network is valid")
}

/// Values taken by the three trailing (discrete) mini-ACAS inputs.
pub const MINI_ACAS_LEVELS: [f64; 3] = [0.0, 0.5, 1.0];
pub const MINI_ACAS_SLICE_DIMS: [usize; 3] = [2, 3, 4];

/// A 5-input, 5-label network and a dataset labeled by it.
///
/// The first two inputs are continuous in `[0, 1]`; the last three take
/// values from [`MINI_ACAS_LEVELS`]. Network seeds are tried in order until
/// every label is predicted for at least 5% of the points.
pub fn mini_acas(seed: u64, n_points: usize) -> (Network, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..n_points)
        .map(|_| {
            let mut x = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            for _ in 0..3 {
                x.push(MINI_ACAS_LEVELS[rng.gen_range(0..MINI_ACAS_LEVELS.len())]);
            }
            x
        })
        .collect();
    let bounds = vec![Interval::new(0.0, 1.0); 5];
    let min_share = n_points / 20;
    for attempt in 0.. {
        let net = random_network(
            seed.wrapping_add(attempt),
            &[5, 8, 8, 5],
            1.0,
            Some(bounds.clone()),
        );
        let points: Vec<LabeledPoint> = inputs
            .iter()
            .map(|x| LabeledPoint::new(x.clone(), net.predicted_label(x).expect("5 inputs")))
            .collect();
        let mut counts = [0usize; 5];
        points.iter().for_each(|p| counts[p.label] += 1);
        if counts.iter().all(|&c| c >= min_share.max(1)) {
            let ds = Dataset::new(points, Some(5)).expect("generated points are valid");
            return (net, ds);
        }
    }
    unreachable!()
}
