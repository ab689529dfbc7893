//! Brute-force grid search for counterexamples.
//!
//! Enumerates a regular grid over a query's root box and evaluates the
//! network at every grid point inside the ball. Ground truth for small
//! (two- or three-dimensional) test instances; refuses anything larger than
//! its point budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Interval, Network};
use crate::verifier::Query;

pub const DEFAULT_MAX_POINTS: u64 = 10_000_000;
pub const DEFAULT_DIVISIONS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub step: f64,
    pub max_points: u64,
}

impl GridSpec {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            max_points: DEFAULT_MAX_POINTS,
        }
    }

    /// Step of `radius / 50`.
    pub fn for_radius(radius: f64) -> Self {
        Self::new(radius / DEFAULT_DIVISIONS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridResult {
    NoneFound { examined: u64 },
    Found { witness: Vec<f64>, examined: u64 },
}

impl GridResult {
    pub fn is_found(&self) -> bool {
        matches!(self, GridResult::Found { .. })
    }

    pub fn examined(&self) -> u64 {
        match self {
            GridResult::NoneFound { examined } | GridResult::Found { examined, .. } => *examined,
        }
    }
}

fn steps_along(iv: &Interval, step: f64) -> u64 {
    if iv.width() <= 0.0 {
        0
    } else {
        (iv.width() / step * (1.0 + 1e-12)).floor() as u64
    }
}

/// Number of grid points in the query's root box, as a float so oversized
/// grids do not overflow.
pub fn estimated_points(q: &Query<'_>, grid: &GridSpec) -> f64 {
    q.root_box()
        .iter()
        .map(|iv| {
            if iv.is_empty() {
                0.0
            } else {
                steps_along(iv, grid.step) as f64 + 1.0
            }
        })
        .product()
}

/// First grid point, in lexicographic order, inside the ball with
/// `score(target) >= score(label)`.
pub fn grid_search(net: &Network, q: &Query<'_>, grid: &GridSpec) -> Result<GridResult> {
    if !(grid.step > 0.0) || !grid.step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive, got {}",
            grid.step
        )));
    }
    let estimated = estimated_points(q, grid);
    if estimated > grid.max_points as f64 {
        return Err(Error::GridTooLarge {
            estimated,
            bound: grid.max_points,
        });
    }
    let input_box = q.root_box();
    if input_box.iter().any(Interval::is_empty) {
        return Ok(GridResult::NoneFound { examined: 0 });
    }
    let counts: Vec<u64> = input_box
        .iter()
        .map(|iv| steps_along(iv, grid.step) + 1)
        .collect();
    let center = q.ball_center();
    let radius = q.ball_radius();
    let limit = radius * (1.0 + 1e-12) + 1e-12;

    let mut index = vec![0u64; counts.len()];
    let mut x = vec![0.0; counts.len()];
    let mut examined = 0;
    loop {
        for (d, iv) in input_box.iter().enumerate() {
            x[d] = (iv.lo + index[d] as f64 * grid.step).min(iv.hi);
        }
        let l1: f64 = x.iter().zip(&center).map(|(a, c)| (a - c).abs()).sum();
        if l1 <= limit {
            examined += 1;
            let scores = net.evaluate(&x)?;
            if scores.score(q.target()) >= scores.score(q.label()) {
                return Ok(GridResult::Found {
                    witness: x,
                    examined,
                });
            }
        }
        // odometer, last dimension fastest
        let mut d = counts.len();
        loop {
            if d == 0 {
                return Ok(GridResult::NoneFound { examined });
            }
            d -= 1;
            index[d] += 1;
            if index[d] < counts[d] {
                break;
            }
            index[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};

    fn constant_net(scores: Vec<f64>) -> Network {
        let out = Layer::new(
            vec![vec![0.0, 0.0]; scores.len()],
            scores,
            Activation::Identity,
        )
        .unwrap();
        Network::new(2, vec![out], None).unwrap()
    }

    #[test]
    fn constant_unsafe_returns_first_in_ball_point() {
        let net = constant_net(vec![0.0, 1.0]);
        let q = Query::new(&net, vec![0.0, 0.0], 1.0, 0, 1).unwrap();
        let r = grid_search(&net, &q, &GridSpec::new(0.5)).unwrap();
        // x0 = -1 is the smallest first coordinate; only x1 = 0 is in the ball there
        assert_eq!(
            r,
            GridResult::Found {
                witness: vec![-1.0, 0.0],
                examined: 1
            }
        );
    }

    #[test]
    fn coarse_grid_can_miss_the_ball() {
        let net = constant_net(vec![0.0, 1.0]);
        let q = Query::new(&net, vec![0.0, 0.0], 0.3, 0, 1).unwrap();
        // grid points at -0.3 only: the corner (-0.3, -0.3) is outside the ball
        let r = grid_search(&net, &q, &GridSpec::new(1.0)).unwrap();
        assert_eq!(r, GridResult::NoneFound { examined: 0 });
    }

    #[test]
    fn safe_network_examines_every_ball_point() {
        let net = constant_net(vec![1.0, 0.0]);
        let q = Query::new(&net, vec![0.0, 0.0], 1.0, 0, 1).unwrap();
        let r = grid_search(&net, &q, &GridSpec::new(0.5)).unwrap();
        // L1 ball of radius 1 on a 0.5 grid: 1 + 4 + 8 = 13 points
        assert_eq!(r, GridResult::NoneFound { examined: 13 });
    }

    #[test]
    fn oversized_grid_is_refused() {
        let net = constant_net(vec![1.0, 0.0]);
        let q = Query::new(&net, vec![0.0, 0.0], 1.0, 0, 1).unwrap();
        let spec = GridSpec {
            step: 1e-4,
            max_points: 1000,
        };
        assert!(matches!(
            grid_search(&net, &q, &spec),
            Err(Error::GridTooLarge { .. })
        ));
        assert!(grid_search(&net, &q, &GridSpec::new(0.0)).is_err());
    }
}
