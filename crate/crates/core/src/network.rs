//! Feedforward ReLU classifiers.
//!
//! A [`Network`] is a chain of affine layers, each followed by either a ReLU
//! or the identity. The final layer is always the identity so the network
//! produces raw (pre-softmax) per-label scores.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the input box assumed when a network file gives no bounds.
pub const DEFAULT_INPUT_BOUND: f64 = 1e6;

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// One affine layer `act(W z + b)` with a row-major weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Vec<f64>,
    bias: Vec<f64>,
    in_dim: usize,
    activation: Activation,
}

impl Layer {
    /// Builds a layer from weight rows (one row per output neuron).
    pub fn new(rows: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidNetwork("layer has no output neurons".into()));
        }
        let in_dim = rows[0].len();
        if in_dim == 0 {
            return Err(Error::InvalidNetwork("layer has no inputs".into()));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != in_dim) {
            return Err(Error::InvalidNetwork(format!(
                "weight row {i} has {} entries, expected {in_dim}",
                row.len()
            )));
        }
        if bias.len() != rows.len() {
            return Err(Error::InvalidNetwork(format!(
                "bias has {} entries for {} output neurons",
                bias.len(),
                rows.len()
            )));
        }
        let weights: Vec<f64> = rows.into_iter().flatten().collect();
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite weight or bias".into()));
        }
        Ok(Self {
            weights,
            bias,
            in_dim,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron * self.in_dim..(neuron + 1) * self.in_dim]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.in_dim)
    }

    /// `W z + b`, without the activation.
    pub fn pre_activation(&self, z: &[f64]) -> Vec<f64> {
        self.rows()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.pre_activation(z);
        if self.activation == Activation::Relu {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        out
    }
}

/// Per-label scores produced by a network.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the highest score. Ties go to the lowest label index.
    pub fn predicted_label(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.0.iter().enumerate().skip(1) {
            if s > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn score(&self, label: usize) -> f64 {
        self.0[label]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    input_bounds: Vec<Interval>,
}

impl Network {
    /// Validates dimension chaining, the identity output layer and the input box.
    pub fn new(
        input_dim: usize,
        layers: Vec<Layer>,
        input_bounds: Option<Vec<Interval>>,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidNetwork("input_dim must be positive".into()));
        }
        let Some(last) = layers.last() else {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        };
        if last.activation != Activation::Identity {
            return Err(Error::InvalidNetwork(
                "final layer must use the identity activation".into(),
            ));
        }
        let mut expected = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim != expected {
                return Err(Error::DimensionMismatch {
                    context: format!("layer {i} input"),
                    expected,
                    actual: layer.in_dim,
                });
            }
            expected = layer.out_dim();
        }
        let input_bounds = match input_bounds {
            Some(b) => {
                if b.len() != input_dim {
                    return Err(Error::DimensionMismatch {
                        context: "input_bounds".into(),
                        expected: input_dim,
                        actual: b.len(),
                    });
                }
                if let Some((i, _)) = b
                    .iter()
                    .enumerate()
                    .find(|(_, iv)| iv.lo.is_nan() || iv.hi.is_nan() || iv.lo > iv.hi)
                {
                    return Err(Error::InvalidNetwork(format!(
                        "input bound {i} has lower > upper"
                    )));
                }
                b
            }
            None => vec![Interval::new(-DEFAULT_INPUT_BOUND, DEFAULT_INPUT_BOUND); input_dim],
        };
        Ok(Self {
            input_dim,
            layers,
            input_bounds,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn label_count(&self) -> usize {
        self.layers.last().map(Layer::out_dim).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_bounds(&self) -> &[Interval] {
        &self.input_bounds
    }

    /// Number of ReLU neurons across all layers.
    pub fn relu_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.activation == Activation::Relu)
            .map(Layer::out_dim)
            .sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<ScoreVector> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input".into(),
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        let mut z = x.to_vec();
        for layer in &self.layers {
            z = layer.apply(&z);
        }
        Ok(ScoreVector(z))
    }

    pub fn predicted_label(&self, x: &[f64]) -> Result<usize> {
        Ok(self.evaluate(x)?.predicted_label())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::parse("network json", e))?;
        file.into_network()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: NetworkFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    file.into_network()
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, net.to_json_string() + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    input_dim: usize,
    labels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_bounds: Option<Vec<[f64; 2]>>,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

impl NetworkFile {
    fn into_network(self) -> Result<Network> {
        let layers = self
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                Layer::new(l.weights, l.bias, l.activation).map_err(|e| match e {
                    Error::InvalidNetwork(m) => Error::InvalidNetwork(format!("layer {i}: {m}")),
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let bounds = self.input_bounds.map(|b| {
            b.into_iter()
                .map(|[lo, hi]| Interval::new(lo, hi))
                .collect()
        });
        let net = Network::new(self.input_dim, layers, bounds)?;
        if net.label_count() != self.labels {
            return Err(Error::DimensionMismatch {
                context: format!("labels vs layer {} outputs", net.layers.len() - 1),
                expected: self.labels,
                actual: net.label_count(),
            });
        }
        Ok(net)
    }
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        let default_box = net
            .input_bounds
            .iter()
            .all(|b| b.lo == -DEFAULT_INPUT_BOUND && b.hi == DEFAULT_INPUT_BOUND);
        NetworkFile {
            input_dim: net.input_dim,
            labels: net.label_count(),
            input_bounds: (!default_box)
                .then(|| net.input_bounds.iter().map(|b| [b.lo, b.hi]).collect()),
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.rows().map(<[f64]>::to_vec).collect(),
                    bias: l.bias.clone(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: &str = r#"{
        "input_dim": 2, "labels": 2,
        "layers": [ { "weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "identity" } ]
    }"#;

    #[test]
    fn identity_network_loads() {
        let net = Network::from_json_str(IDENTITY).unwrap();
        assert_eq!(net.label_count(), 2);
        assert_eq!(net.input_dim(), 2);
        assert_eq!(net.input_bounds()[0], Interval::new(-1e6, 1e6));
        assert_eq!(net.evaluate(&[3.0, -1.0]).unwrap().0, vec![3.0, -1.0]);
        assert_eq!(net.predicted_label(&[0.0, 7.0]).unwrap(), 1);
    }

    #[test]
    fn chained_dimension_mismatch_names_layer() {
        let text = r#"{
            "input_dim": 2, "labels": 2,
            "layers": [
              { "weights": [[1, 0], [0, 1], [1, 1]], "bias": [0, 0, 0], "activation": "relu" },
              { "weights": [[1, 0], [0, 1]], "bias": [0, 0], "activation": "identity" }
            ]
        }"#;
        match Network::from_json_str(text) {
            Err(Error::DimensionMismatch {
                context,
                expected,
                actual,
            }) => {
                assert_eq!(context, "layer 1 input");
                assert_eq!((expected, actual), (3, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_location() {
        let err = Network::from_json_str(
            r#"{ "input_dim": 2, "labels": 2, "layers": [ { "weights": [[1]] } ] }"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bias"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn relu_output_layer_rejected() {
        let text = r#"{ "input_dim": 1, "labels": 1,
            "layers": [ { "weights": [[1]], "bias": [0], "activation": "relu" } ] }"#;
        assert!(matches!(
            Network::from_json_str(text),
            Err(Error::InvalidNetwork(_))
        ));
    }

    #[test]
    fn inverted_input_bounds_rejected() {
        let text = r#"{ "input_dim": 1, "labels": 1, "input_bounds": [[1, 0]],
            "layers": [ { "weights": [[1]], "bias": [0], "activation": "identity" } ] }"#;
        assert!(matches!(
            Network::from_json_str(text),
            Err(Error::InvalidNetwork(_))
        ));
    }

    #[test]
    fn zero_weights_return_last_bias() {
        let l1 = Layer::new(vec![vec![0.0; 2]; 3], vec![1.0, 2.0, 3.0], Activation::Relu).unwrap();
        let l2 = Layer::new(vec![vec![0.0; 3]; 2], vec![-4.0, 0.5], Activation::Identity).unwrap();
        let net = Network::new(2, vec![l1, l2], None).unwrap();
        assert_eq!(net.evaluate(&[9.0, -9.0]).unwrap().0, vec![-4.0, 0.5]);
    }

    #[test]
    fn ties_go_to_lowest_label() {
        assert_eq!(ScoreVector(vec![1.0, 5.0, 5.0]).predicted_label(), 1);
        assert_eq!(ScoreVector(vec![2.0, 2.0]).predicted_label(), 0);
    }

    #[test]
    fn evaluate_rejects_wrong_arity() {
        let net = Network::from_json_str(IDENTITY).unwrap();
        assert!(matches!(
            net.evaluate(&[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 1,
                ..
            })
        ));
    }

    #[test]
    fn json_round_trip() {
        let net = Network::from_json_str(IDENTITY).unwrap();
        let again = Network::from_json_str(&net.to_json_string()).unwrap();
        assert_eq!(net, again);
    }
}
