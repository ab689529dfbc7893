//! Interval bound propagation.
//!
//! Pre-activation intervals are computed layer by layer from an input box and
//! padded outward by a rounding-error bound, so any `f64` forward pass from a
//! point in the box lands inside them.

use crate::network::{Activation, Interval, Network};

/// Phase assigned to a ReLU by a case split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Active,
    Inactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronState {
    /// ReLU known to pass its input through.
    Active,
    /// ReLU known to output zero.
    Inactive,
    /// ReLU whose phase is not determined by the bounds.
    Unstable,
    /// Neuron of an identity layer.
    Linear,
}

/// Per-layer pre-activation intervals and ReLU states.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub pre: Vec<Vec<Interval>>,
    pub post: Vec<Vec<Interval>>,
    pub state: Vec<Vec<NeuronState>>,
}

impl LayerBounds {
    pub fn unstable_count(&self) -> usize {
        self.state
            .iter()
            .flatten()
            .filter(|s| **s == NeuronState::Unstable)
            .count()
    }

    /// `(layer, neuron)` of every unstable ReLU.
    pub fn unstable(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.state.iter().enumerate().flat_map(|(l, states)| {
            states
                .iter()
                .enumerate()
                .filter(|(_, s)| **s == NeuronState::Unstable)
                .map(move |(n, _)| (l, n))
        })
    }
}

/// Phases fixed by branching, indexed `[layer][neuron]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseMap(pub Vec<Vec<Option<Phase>>>);

impl PhaseMap {
    pub fn unconstrained(net: &Network) -> Self {
        PhaseMap(
            net.layers()
                .iter()
                .map(|l| vec![None; l.out_dim()])
                .collect(),
        )
    }

    pub fn get(&self, layer: usize, neuron: usize) -> Option<Phase> {
        self.0[layer][neuron]
    }

    pub fn with(&self, layer: usize, neuron: usize, phase: Phase) -> Self {
        let mut next = self.clone();
        next.0[layer][neuron] = Some(phase);
        next
    }
}

/// Sound pre-activation bounds over `input_box` with no phases fixed.
pub fn tighten_bounds(net: &Network, input_box: &[Interval]) -> LayerBounds {
    propagate(net, input_box, &PhaseMap::unconstrained(net))
        .expect("unconstrained propagation over a nonempty box is feasible")
}

/// Bounds under fixed phases. `None` if some fixed phase contradicts the
/// bounds, so the node has no feasible point.
pub fn propagate(net: &Network, input_box: &[Interval], phases: &PhaseMap) -> Option<LayerBounds> {
    if input_box.iter().any(Interval::is_empty) {
        return None;
    }
    let mut current: Vec<Interval> = input_box.to_vec();
    let mut out = LayerBounds {
        pre: Vec::with_capacity(net.layers().len()),
        post: Vec::with_capacity(net.layers().len()),
        state: Vec::with_capacity(net.layers().len()),
    };
    for (li, layer) in net.layers().iter().enumerate() {
        let mut pre = Vec::with_capacity(layer.out_dim());
        let mut post = Vec::with_capacity(layer.out_dim());
        let mut state = Vec::with_capacity(layer.out_dim());
        for (ni, (row, &b)) in layer.rows().zip(layer.bias()).enumerate() {
            let mut lo = b;
            let mut hi = b;
            let mut scale = b.abs();
            for (w, iv) in row.iter().zip(&current) {
                if *w >= 0.0 {
                    lo += w * iv.lo;
                    hi += w * iv.hi;
                } else {
                    lo += w * iv.hi;
                    hi += w * iv.lo;
                }
                scale += w.abs() * iv.lo.abs().max(iv.hi.abs());
            }
            let pad = scale * f64::EPSILON * 2.0 * (row.len() as f64 + 2.0);
            let mut iv = Interval::new(lo - pad, hi + pad);

            let s = match layer.activation() {
                Activation::Identity => NeuronState::Linear,
                Activation::Relu => match phases.get(li, ni) {
                    Some(Phase::Active) => {
                        if iv.hi < 0.0 {
                            return None;
                        }
                        iv.lo = iv.lo.max(0.0);
                        NeuronState::Active
                    }
                    Some(Phase::Inactive) => {
                        if iv.lo > 0.0 {
                            return None;
                        }
                        iv.hi = iv.hi.min(0.0);
                        NeuronState::Inactive
                    }
                    None if iv.lo >= 0.0 => NeuronState::Active,
                    None if iv.hi <= 0.0 => NeuronState::Inactive,
                    None => NeuronState::Unstable,
                },
            };
            let p = match s {
                NeuronState::Linear | NeuronState::Active => iv,
                NeuronState::Inactive => Interval::point(0.0),
                NeuronState::Unstable => Interval::new(0.0, iv.hi),
            };
            pre.push(iv);
            post.push(p);
            state.push(s);
        }
        current = post.clone();
        out.pre.push(pre);
        out.post.push(post);
        out.state.push(state);
    }
    Some(out)
}
