//! Regenerates the files under `tests/fixtures`.
//!
//! ```text
//! cargo run -p deepsafe --example gen_fixtures
//! ```

use std::path::Path;

use deepsafe::dataset::{save_dataset, Dataset, LabeledPoint};
use deepsafe::network::{save_network, Activation, Interval, Layer, Network};
use deepsafe::synthetic::{banded_toy, mini_acas, random_network};

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Random 2-8-3 network with weights rounded to two decimals, on `[-1, 1]^2`.
fn tiny_network(seed: u64) -> Network {
    let bounds = vec![Interval::new(-1.0, 1.0); 2];
    let raw = random_network(seed, &[2, 8, 3], 1.0, None);
    let layers = raw
        .layers()
        .iter()
        .map(|l| {
            let rows = l
                .rows()
                .map(|r| r.iter().copied().map(round2).collect())
                .collect();
            let bias = l.bias().iter().copied().map(round2).collect();
            Layer::new(rows, bias, l.activation()).unwrap()
        })
        .collect();
    Network::new(2, layers, Some(bounds)).unwrap()
}

/// 7 x 7 grid over `[-0.9, 0.9]^2`, labeled by the network's prediction.
fn tiny_dataset(net: &Network) -> Dataset {
    let mut points = Vec::new();
    for i in 0..7 {
        for j in 0..7 {
            let x = vec![-0.9 + 0.3 * i as f64, -0.9 + 0.3 * j as f64];
            let x: Vec<f64> = x.into_iter().map(round2).collect();
            let label = net.predicted_label(&x).unwrap();
            points.push(LabeledPoint::new(x, label));
        }
    }
    Dataset::new(points, Some(net.label_count())).unwrap()
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir).unwrap();

    // first seed whose grid shows every label at least 8 times
    let net = (0..)
        .map(tiny_network)
        .find(|net| {
            let h = tiny_dataset(net).label_histogram();
            h.len() == 3 && h.values().all(|&n| n >= 8)
        })
        .unwrap();
    assert!(net.layers().last().unwrap().activation() == Activation::Identity);
    save_network(&net, dir.join("tiny_net.json")).unwrap();
    save_dataset(&tiny_dataset(&net), dir.join("tiny.csv")).unwrap();

    save_dataset(&banded_toy(1, 4, 25), dir.join("banded.csv")).unwrap();

    let (acas_net, acas_data) = mini_acas(1, 300);
    save_network(&acas_net, dir.join("mini_acas_net.json")).unwrap();
    save_dataset(&acas_data, dir.join("mini_acas.csv")).unwrap();
    println!("fixtures written to {}", dir.display());
}
