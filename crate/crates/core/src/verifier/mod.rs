//! Complete targeted-robustness checking for ReLU networks over an L1 ball.
//!
//! [`decide`] answers whether some `x` with `|x - c|_1 <= r` (inside the
//! network's input box, optionally on a slice) has
//! `score(x, target) >= score(x, label)`. The answer is either `Safe`, proven
//! by exhausting every ReLU phase case, or `Unsafe` with a witness that has
//! been re-checked by a plain forward pass.

pub mod bounds;
pub mod encoding;
mod search;
pub mod simplex;

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Interval, Network};

pub use bounds::{tighten_bounds, LayerBounds, NeuronState, Phase, PhaseMap};

/// Slack allowed when re-validating witnesses.
pub const EPS_FEAS: f64 = 1e-6;
pub const DEFAULT_MAX_SPLITS: u64 = 1_000_000;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(12 * 60 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_splits: u64,
    pub timeout: Duration,
    /// Re-solve every pruned node in exact rational arithmetic.
    pub exact_recheck: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_splits: DEFAULT_MAX_SPLITS,
            timeout: DEFAULT_TIMEOUT,
            exact_recheck: false,
        }
    }
}

/// Dimensions pinned to fixed values, with the radius left for the free ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceConstraint {
    pub fixed: Vec<(usize, f64)>,
    pub radius: f64,
}

/// Radius of the circle cut from an L2 ball of radius `r` by the plane that
/// pins `fixed` dimensions. `None` when the plane misses the ball interior.
pub fn slice_radius(r: f64, center: &[f64], fixed: &[(usize, f64)]) -> Result<Option<f64>> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {r}"
        )));
    }
    let mut seen = BTreeSet::new();
    let mut d2 = 0.0;
    for &(dim, value) in fixed {
        if !seen.insert(dim) {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} fixed twice"
            )));
        }
        let c = center.get(dim).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "dimension {dim} out of range for {} inputs",
                center.len()
            ))
        })?;
        d2 += (value - c) * (value - c);
    }
    let d = d2.sqrt();
    if d >= r {
        return Ok(None);
    }
    Ok(Some(((r - d) * (r + d)).sqrt()))
}

#[derive(Debug, Clone)]
pub struct Query<'a> {
    net: &'a Network,
    center: Vec<f64>,
    radius: f64,
    label: usize,
    target: usize,
    slice: Option<SliceConstraint>,
    limits: Limits,
}

impl<'a> Query<'a> {
    pub fn new(
        net: &'a Network,
        center: Vec<f64>,
        radius: f64,
        label: usize,
        target: usize,
    ) -> Result<Self> {
        if center.len() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "query center".into(),
                expected: net.input_dim(),
                actual: center.len(),
            });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidQuery(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if label == target {
            return Err(Error::InvalidQuery(
                "target label equals the region label".into(),
            ));
        }
        let labels = net.label_count();
        if label >= labels || target >= labels {
            return Err(Error::InvalidQuery(format!(
                "labels ({label}, {target}) out of range for {labels} outputs"
            )));
        }
        if let Some(i) = center
            .iter()
            .zip(net.input_bounds())
            .position(|(c, iv)| !iv.contains(*c))
        {
            return Err(Error::InvalidQuery(format!(
                "center dimension {i} lies outside the input bounds"
            )));
        }
        Ok(Self {
            net,
            center,
            radius,
            label,
            target,
            slice: None,
            limits: Limits::default(),
        })
    }

    pub fn with_slice(mut self, slice: SliceConstraint) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(dim, value) in &slice.fixed {
            if dim >= self.net.input_dim() || !seen.insert(dim) {
                return Err(Error::InvalidQuery(format!("bad slice dimension {dim}")));
            }
            if !value.is_finite() {
                return Err(Error::InvalidQuery(format!(
                    "slice value for dimension {dim} is not finite"
                )));
            }
        }
        if !(slice.radius >= 0.0) || slice.radius > self.radius * (1.0 + 1e-12) {
            return Err(Error::InvalidQuery(format!(
                "slice radius {} must lie in [0, {}]",
                slice.radius, self.radius
            )));
        }
        self.slice = Some(slice);
        Ok(self)
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    pub fn net(&self) -> &'a Network {
        self.net
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn slice(&self) -> Option<&SliceConstraint> {
        self.slice.as_ref()
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    /// Center of the verified ball: the region center projected onto the slice.
    pub fn ball_center(&self) -> Vec<f64> {
        let mut c = self.center.clone();
        if let Some(slice) = &self.slice {
            for &(dim, value) in &slice.fixed {
                c[dim] = value;
            }
        }
        c
    }

    pub fn ball_radius(&self) -> f64 {
        self.slice.as_ref().map_or(self.radius, |s| s.radius)
    }

    /// Ball bounding box intersected with the input bounds; slice dims pinned.
    /// Empty intervals mean no admissible input exists.
    pub fn root_box(&self) -> Vec<Interval> {
        let c = self.ball_center();
        let r = self.ball_radius();
        let mut b: Vec<Interval> = c
            .iter()
            .zip(self.net.input_bounds())
            .map(|(ci, bound)| Interval::new(ci - r, ci + r).intersect(bound))
            .collect();
        if let Some(slice) = &self.slice {
            for &(dim, value) in &slice.fixed {
                b[dim] = Interval::point(value).intersect(&self.net.input_bounds()[dim]);
            }
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Safe,
    Unsafe { witness: Vec<f64> },
    ResourceLimit { reason: String, open_nodes: usize },
}

impl Outcome {
    pub fn is_safe(&self) -> bool {
        matches!(self, Outcome::Safe)
    }

    pub fn is_unsafe(&self) -> bool {
        matches!(self, Outcome::Unsafe { .. })
    }

    pub fn witness(&self) -> Option<&[f64]> {
        match self {
            Outcome::Unsafe { witness } => Some(witness),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Branching operations on unstable ReLUs.
    pub splits: u64,
    /// Nodes reached with every ReLU phase fixed.
    pub leaves: u64,
    pub lp_solves: u64,
    pub root_unstable: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub stats: SearchStats,
}

pub fn decide(q: &Query<'_>) -> Result<Verdict> {
    search::run(q)
}

/// Checks every witness condition by direct evaluation: inside the ball and
/// the input bounds, slice dimensions exact, and `score(target) >= score(label)`
/// up to [`EPS_FEAS`].
pub fn check_witness(net: &Network, q: &Query<'_>, x: &[f64]) -> bool {
    witness_violation(net, q, x).is_none()
}

pub(crate) fn witness_violation(net: &Network, q: &Query<'_>, x: &[f64]) -> Option<String> {
    if x.len() != net.input_dim() {
        return Some(format!(
            "witness has {} entries, expected {}",
            x.len(),
            net.input_dim()
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Some("witness is not finite".into());
    }
    if let Some(i) = x
        .iter()
        .zip(net.input_bounds())
        .position(|(v, iv)| !iv.contains(*v))
    {
        return Some(format!("dimension {i} outside the input bounds"));
    }
    if let Some(slice) = q.slice() {
        if let Some((dim, _)) = slice.fixed.iter().find(|(d, v)| x[*d] != *v) {
            return Some(format!("slice dimension {dim} not pinned"));
        }
    }
    let l1: f64 = x
        .iter()
        .zip(q.ball_center())
        .map(|(a, c)| (a - c).abs())
        .sum();
    if l1 > q.ball_radius() + EPS_FEAS {
        return Some(format!(
            "L1 distance {l1} exceeds radius {}",
            q.ball_radius()
        ));
    }
    let scores = net.evaluate(x).ok()?;
    let margin = scores.score(q.target()) - scores.score(q.label());
    if margin < -EPS_FEAS {
        return Some(format!("score margin {margin} is negative"));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};

    fn constant_net(scores: [f64; 3]) -> Network {
        let hidden =
            Layer::new(vec![vec![0.0, 0.0]; 2], vec![1.0, -1.0], Activation::Relu).unwrap();
        let out = Layer::new(
            vec![vec![0.0, 0.0]; 3],
            scores.to_vec(),
            Activation::Identity,
        )
        .unwrap();
        Network::new(2, vec![hidden, out], None).unwrap()
    }

    #[test]
    fn slice_radius_examples() {
        assert_eq!(
            slice_radius(2.0, &[1.0, 2.0, 3.0], &[(1, 2.0), (2, 3.0)]).unwrap(),
            Some(2.0)
        );
        assert_eq!(
            slice_radius(5.0, &[0.0, 0.0], &[(1, 3.0)]).unwrap(),
            Some(4.0)
        );
        assert_eq!(
            slice_radius(2.0, &[0.0, 0.0, 0.0], &[(1, 1.0), (2, 2.0)]).unwrap(),
            None
        );
        assert_eq!(slice_radius(3.0, &[0.0], &[(0, -3.0)]).unwrap(), None);
        assert!(slice_radius(1.0, &[0.0, 0.0], &[(0, 0.0), (0, 0.1)]).is_err());
        assert!(slice_radius(0.0, &[0.0], &[]).is_err());
    }

    #[test]
    fn constant_unsafe_network_returns_center() {
        let net = constant_net([0.0, 2.0, 1.0]);
        let q = Query::new(&net, vec![0.3, -0.2], 0.5, 0, 1).unwrap();
        let v = decide(&q).unwrap();
        assert_eq!(
            v.outcome,
            Outcome::Unsafe {
                witness: vec![0.3, -0.2]
            }
        );
        assert!(check_witness(&net, &q, &[0.3, -0.2]));
        assert!(!check_witness(&net, &q, &[0.9, -0.2]));
    }

    #[test]
    fn constant_safe_network() {
        let net = constant_net([3.0, 2.0, 1.0]);
        for target in [1, 2] {
            let q = Query::new(&net, vec![0.0, 0.0], 1.0, 0, target).unwrap();
            assert_eq!(decide(&q).unwrap().outcome, Outcome::Safe);
        }
    }

    #[test]
    fn equal_scores_count_as_unsafe() {
        let net = constant_net([1.0, 1.0, 0.0]);
        let q = Query::new(&net, vec![0.0, 0.0], 1.0, 0, 1).unwrap();
        assert!(decide(&q).unwrap().outcome.is_unsafe());
    }

    #[test]
    fn query_validation() {
        let net = constant_net([0.0, 0.0, 0.0]);
        assert!(Query::new(&net, vec![0.0, 0.0], 0.0, 0, 1).is_err());
        assert!(Query::new(&net, vec![0.0, 0.0], 1.0, 1, 1).is_err());
        assert!(Query::new(&net, vec![0.0, 0.0], 1.0, 0, 3).is_err());
        assert!(Query::new(&net, vec![0.0], 1.0, 0, 1).is_err());
        assert!(Query::new(&net, vec![2e6, 0.0], 1.0, 0, 1).is_err());
        let q = Query::new(&net, vec![0.0, 0.0], 1.0, 0, 1).unwrap();
        assert!(q
            .clone()
            .with_slice(SliceConstraint {
                fixed: vec![(2, 0.0)],
                radius: 0.5
            })
            .is_err());
        assert!(q
            .with_slice(SliceConstraint {
                fixed: vec![(1, 0.0)],
                radius: 1.5
            })
            .is_err());
    }

    #[test]
    fn identity_difference_is_decided_exactly() {
        // score1 - score0 = x0 + x1 - 1.5; over |x - 0|_1 <= r the max is r - 1.5
        let out = Layer::new(
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![0.0, -1.5],
            Activation::Identity,
        )
        .unwrap();
        let net = Network::new(2, vec![out], None).unwrap();
        let safe = Query::new(&net, vec![0.0, 0.0], 1.4, 0, 1).unwrap();
        assert!(decide(&safe).unwrap().outcome.is_safe());
        let edge = Query::new(&net, vec![0.0, 0.0], 1.5, 0, 1).unwrap();
        let v = decide(&edge).unwrap();
        let w = v
            .outcome
            .witness()
            .expect("boundary point is a witness")
            .to_vec();
        assert!(check_witness(&net, &edge, &w));
    }

    #[test]
    fn slice_pins_dimensions_in_witness() {
        let out = Layer::new(
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![0.0, -1.0],
            Activation::Identity,
        )
        .unwrap();
        let net = Network::new(2, vec![out], None).unwrap();
        let q = Query::new(&net, vec![0.0, 0.0], 2.0, 0, 1)
            .unwrap()
            .with_slice(SliceConstraint {
                fixed: vec![(1, 0.25)],
                radius: 1.0,
            })
            .unwrap();
        let v = decide(&q).unwrap();
        let w = v.outcome.witness().unwrap();
        assert_eq!(w[1], 0.25);
        assert!(check_witness(&net, &q, w));

        // pinned far below: x0 <= 1 and x1 = -0.5 gives margin <= -0.5
        let q = Query::new(&net, vec![0.0, 0.0], 2.0, 0, 1)
            .unwrap()
            .with_slice(SliceConstraint {
                fixed: vec![(1, -0.5)],
                radius: 1.0,
            })
            .unwrap();
        assert!(decide(&q).unwrap().outcome.is_safe());
    }
}
