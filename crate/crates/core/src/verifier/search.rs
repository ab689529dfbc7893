//! Depth-first branch and bound over ReLU phases.

use std::time::Instant;

use num_rational::BigRational;

use super::bounds::{propagate, LayerBounds, Phase, PhaseMap};
use super::encoding::{encode, BallSpec};
use super::simplex::{LpOutcome, LpScalar};
use super::{witness_violation, Outcome, Query, SearchStats, Verdict, EPS_FEAS};
use crate::error::{Error, Result};
use crate::network::{Interval, Network};

/// What one LP says about a node.
enum NodeResult {
    /// No point of the node can reach the target.
    Pruned,
    /// Relaxed optimum at this input point.
    Candidate(Vec<f64>),
}

pub(super) fn run(q: &Query<'_>) -> Result<Verdict> {
    let start = Instant::now();
    let net = q.net();
    let mut stats = SearchStats::default();
    let finish = |outcome: Outcome, mut stats: SearchStats| {
        stats.wall_ms = start.elapsed().as_millis() as u64;
        Ok(Verdict { outcome, stats })
    };

    let input_box = q.root_box();
    if input_box.iter().any(Interval::is_empty) {
        return finish(Outcome::Safe, stats);
    }
    let center = q.ball_center();
    let ball = BallSpec {
        center: &center,
        radius: q.ball_radius(),
        input_box: &input_box,
    };

    if witness_violation(net, q, &center).is_none() {
        return finish(
            Outcome::Unsafe {
                witness: center.clone(),
            },
            stats,
        );
    }

    let root = PhaseMap::unconstrained(net);
    let Some(root_bounds) = propagate(net, &input_box, &root) else {
        return finish(Outcome::Safe, stats);
    };
    stats.root_unstable = root_bounds.unstable_count();

    let limits = *q.limits();
    let mut stack = vec![root];
    while let Some(phases) = stack.pop() {
        if start.elapsed() > limits.timeout {
            return finish(
                Outcome::ResourceLimit {
                    reason: format!("time limit of {} s reached", limits.timeout.as_secs_f64()),
                    open_nodes: stack.len() + 1,
                },
                stats,
            );
        }

        let Some(bounds) = propagate(net, &input_box, &phases) else {
            continue;
        };
        let leaf = bounds.unstable_count() == 0;
        if leaf {
            stats.leaves += 1;
        }
        if margin_upper_bound(net, &bounds, &input_box, q.label(), q.target()) < -EPS_FEAS {
            continue;
        }

        stats.lp_solves += 1;
        let mut result = solve_node::<f64>(net, &bounds, &ball, q, false)?;
        if matches!(result, NodeResult::Pruned) && limits.exact_recheck {
            stats.lp_solves += 1;
            result = solve_node::<BigRational>(net, &bounds, &ball, q, true)?;
        }
        let x = match result {
            NodeResult::Pruned => continue,
            NodeResult::Candidate(x) => x,
        };
        match witness_violation(net, q, &x) {
            None => return finish(Outcome::Unsafe { witness: x }, stats),
            Some(why) if leaf => {
                return Err(Error::WitnessValidation(format!(
                    "leaf LP point {x:?} rejected: {why}"
                )))
            }
            Some(_) => {}
        }

        if stats.splits >= limits.max_splits {
            return finish(
                Outcome::ResourceLimit {
                    reason: format!("split limit {} reached", limits.max_splits),
                    open_nodes: stack.len() + 1,
                },
                stats,
            );
        }
        let (layer, neuron) = branch_neuron(&bounds);
        stats.splits += 1;
        stack.push(phases.with(layer, neuron, Phase::Inactive));
        stack.push(phases.with(layer, neuron, Phase::Active));
    }
    finish(Outcome::Safe, stats)
}

fn solve_node<T: LpScalar>(
    net: &Network,
    bounds: &LayerBounds,
    ball: &BallSpec<'_>,
    q: &Query<'_>,
    exact: bool,
) -> Result<NodeResult> {
    let program = encode::<T>(net, bounds, ball, q.label(), q.target());
    match program.lp.solve() {
        LpOutcome::Infeasible => Ok(NodeResult::Pruned),
        LpOutcome::Unbounded => Err(Error::Solver("node LP unbounded over a bounded box".into())),
        LpOutcome::Optimal { value, point } => {
            let margin = value + program.objective_offset.clone();
            let pruned = if exact {
                margin < T::zero()
            } else {
                margin.to_f64() < -EPS_FEAS
            };
            if pruned {
                Ok(NodeResult::Pruned)
            } else {
                Ok(NodeResult::Candidate(
                    program.input_point(&point, ball.input_box),
                ))
            }
        }
    }
}

/// Interval upper bound of `score(target) - score(label)`.
fn margin_upper_bound(
    net: &Network,
    bounds: &LayerBounds,
    input_box: &[Interval],
    label: usize,
    target: usize,
) -> f64 {
    let layers = net.layers();
    let last = &layers[layers.len() - 1];
    let inputs: &[Interval] = if layers.len() >= 2 {
        &bounds.post[layers.len() - 2]
    } else {
        input_box
    };
    let mut hi = last.bias()[target] - last.bias()[label];
    let mut scale = hi.abs();
    for ((wt, wl), iv) in last.row(target).iter().zip(last.row(label)).zip(inputs) {
        let w = wt - wl;
        hi += if w >= 0.0 { w * iv.hi } else { w * iv.lo };
        scale += w.abs() * iv.lo.abs().max(iv.hi.abs());
    }
    hi + scale * f64::EPSILON * 2.0 * (inputs.len() as f64 + 2.0)
}

/// Widest unstable pre-activation interval, earliest layer and neuron on ties.
fn branch_neuron(bounds: &LayerBounds) -> (usize, usize) {
    let mut best = None;
    let mut best_width = f64::NEG_INFINITY;
    for (layer, neuron) in bounds.unstable() {
        let width = bounds.pre[layer][neuron].width();
        if width > best_width {
            best = Some((layer, neuron));
            best_width = width;
        }
    }
    best.expect("a node whose LP point is not a witness has an unstable ReLU")
}
